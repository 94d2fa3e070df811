from fractions import Fraction

import pytest

from app.core.errors import ConfigError, DegenerateDenominator
from app.services.gl4_fast import (
    GL4FastEnumerator,
    GL4Param,
    accepted_params,
    derived_quantities,
    kloosterman_gl4_fast,
    left_unipotent_closed_form,
    properties_filter,
    verify_identity_gl4,
)
from app.services.kloosterman import CellSpec, enumerate_cell, kloosterman_sum


def test_param_from_numerators():
    numerators = {"x": 0, "y": 2, "z": 3, "u": 1, "w": 2, "v": 0}
    param = GL4Param.from_numerators(numerators, p=2, ell=1, m=1)
    assert (param.a, param.b, param.c, param.d, param.e, param.f) == (-1, 0, 1, 1, 0, -1)
    assert param.value("x", 2) == 0
    assert param.value("y", 2) == 1
    assert param.value("z", 2) == Fraction(3, 2)
    assert param.value("u", 2) == Fraction(1, 2)


@pytest.mark.parametrize(("a", "size"), [((1, 2, 1), 64), ((2, 2, 2), 128)])
def test_closed_form_matches_generic_enumeration(settings, a, size):
    spec = CellSpec.build(2, 4, 1, a, settings=settings)
    params = accepted_params(spec, settings)
    elements = enumerate_cell(spec, settings)
    assert len(params) == len(elements) == size
    assert kloosterman_gl4_fast(spec, settings) == kloosterman_sum(spec, settings, elements)


@pytest.mark.parametrize("a", [(1, 1, 1), (2, 1, 1), (1, 1, 2)])
def test_cells_with_unit_middle_step_are_empty(settings, a):
    # a_2 = m 时 m̃ = p^{a2}(xv - w) 只能是单位，性质 (6) 无解
    spec = CellSpec.build(2, 4, 1, a, settings=settings)
    assert accepted_params(spec, settings) == []
    assert enumerate_cell(spec, settings) == []
    assert kloosterman_gl4_fast(spec, settings).is_zero()


@pytest.mark.parametrize("a", [(1, 2, 1), (2, 2, 2)])
def test_accepted_params_satisfy_identity_and_properties(settings, a):
    spec = CellSpec.build(2, 4, 1, a, settings=settings)
    params = accepted_params(spec, settings)
    assert params
    for param in params:
        assert param.e == a[0]
        assert properties_filter(param, spec)
        assert verify_identity_gl4(param, spec)
        derived = derived_quantities(param, spec)
        assert derived.mu.congruent_one(1)
        assert derived.lam.congruent_one(1)


@pytest.mark.parametrize("a", [(1, 2, 1), (2, 2, 2)])
def test_corner_entry_is_inverse_of_mu(settings, a):
    # u_6 = μ^{-1}·c_1^{-1}，c_1 = p^{a1}v_1
    spec = CellSpec.build(2, 4, 1, a, settings=settings)
    ctx = spec.ctx
    corner = ctx.scalar(Fraction(1, spec.v[0] * 2 ** a[0]))
    params = accepted_params(spec, settings)
    assert params
    for param in params:
        u = left_unipotent_closed_form(param, spec)
        assert u.entry(0, 3) == derived_quantities(param, spec).mu.inverse() * corner


def test_vanishing_denominator_is_rejected(settings):
    spec = CellSpec.build(2, 4, 1, (2, 2, 2), settings=settings)
    # 只有 w 非零时 uv - wy 为精确零
    zeros = {name: 0 for name in ("unit_x", "unit_y", "unit_z", "unit_u", "unit_v")}
    param = GL4Param(m=1, a=-1, b=-1, c=-1, d=-1, e=2, f=-1, unit_w=1, **zeros)
    assert not properties_filter(param, spec)
    with pytest.raises(DegenerateDenominator):
        left_unipotent_closed_form(param, spec)
    with pytest.raises(DegenerateDenominator):
        verify_identity_gl4(param, spec)


def test_involution_maps_accepted_params_onto_reversed_cell(settings):
    spec = CellSpec.build(
        2,
        4,
        1,
        (1, 2, 1),
        nu=[1, Fraction(1, 2), 2],
        nu_prime=[3, 1, Fraction(3, 2)],
        settings=settings,
    )
    mirrored = spec.involuted()
    assert mirrored.a == (1, 2, 1)
    assert mirrored.nu == (2, Fraction(1, 2), 1)
    assert len(accepted_params(mirrored, settings)) == len(accepted_params(spec, settings)) > 0
    assert kloosterman_gl4_fast(mirrored, settings) == kloosterman_gl4_fast(spec, settings).conj()


def test_fast_path_with_general_characters(settings):
    spec = CellSpec.build(
        2,
        4,
        1,
        (1, 2, 1),
        nu=[1, Fraction(1, 2), 2],
        nu_prime=[3, 1, Fraction(3, 2)],
        settings=settings,
    )
    assert accepted_params(spec, settings)
    assert kloosterman_gl4_fast(spec, settings) == kloosterman_sum(spec, settings)


def test_cell_below_level_is_empty_on_both_paths(settings):
    spec = CellSpec.build(2, 4, 1, (0, 1, 1), settings=settings)
    assert not GL4FastEnumerator(spec, settings).admissible()
    assert accepted_params(spec, settings) == []
    assert kloosterman_gl4_fast(spec, settings).is_zero()
    assert enumerate_cell(spec, settings) == []


def test_fast_grid_is_smaller_than_generic(settings):
    spec = CellSpec.build(2, 4, 1, (2, 2, 2), settings=settings)
    assert GL4FastEnumerator(spec, settings).grid_size() == 4**5


def test_fast_path_requires_gl4(settings):
    spec = CellSpec.build(3, 3, 1, (1, 1), settings=settings)
    with pytest.raises(ConfigError):
        kloosterman_gl4_fast(spec, settings)
