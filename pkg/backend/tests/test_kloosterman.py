from fractions import Fraction
from itertools import product

import pytest

from app.core.errors import ConfigError, Infeasible
from app.services.group_geometry import in_Km
from app.services.kloosterman import (
    CellSpec,
    canonical_uprime,
    default_units,
    enumerate_cell,
    kloosterman_sum,
    longest_sign,
    orbit_decompose,
    restricted_lambdas,
    s2_restricted,
    s2_twisted_decomposition,
    stevens_identity_check,
    torus_slot_generators,
    unit_group_structure,
    upper_positions,
    v_w_count,
)
from app.services.padic_core import CycloSum, PrimeContext


def test_longest_sign_and_default_units():
    assert [longest_sign(n) for n in range(1, 7)] == [1, -1, -1, 1, 1, -1]
    assert default_units(2) == (1, -1)
    assert default_units(4) == (1, 1, 1, 1)


def test_cell_spec_validation(settings):
    with pytest.raises(ConfigError):
        CellSpec.build(3, 3, 1, [1], settings=settings)
    with pytest.raises(ConfigError):
        CellSpec.build(3, 2, 1, [1], v=[3, 1], settings=settings)
    with pytest.raises(ConfigError):
        CellSpec.build(3, 2, 1, [1], nu=[Fraction(1, 9)], settings=settings)
    with pytest.raises(ConfigError):
        CellSpec.build(3, 2, 0, [1], settings=settings)


def test_feasibility_follows_determinant(settings):
    assert CellSpec.build(3, 2, 1, [1], settings=settings).feasible
    assert not CellSpec.build(3, 2, 1, [1], v=[1, 1], settings=settings).feasible
    assert enumerate_cell(CellSpec.build(3, 2, 1, [1], v=[1, 1], settings=settings), settings) == []


def test_gl2_cell_sum(settings):
    spec = CellSpec.build(3, 2, 1, [1], settings=settings)
    elements = enumerate_cell(spec, settings)
    assert len(elements) == 3
    assert all(in_Km(element.g, 1) for element in elements)
    assert kloosterman_sum(spec, settings, elements) == CycloSum.monomial(3, 1, 2, weight=3)


@pytest.mark.parametrize(("p", "a"), list(product([2, 3, 5], [1, 2, 3])))
def test_gl2_sum_is_a_restricted_s2(settings, p, a):
    spec = CellSpec.build(p, 2, 1, [a], nu=[1], nu_prime=[2], settings=settings)
    # Kl = S_2(ν′v_1^{-1}, -νv_2; p^a)，v = (1, -1)
    assert kloosterman_sum(spec, settings) == s2_restricted(1, 2, a, 1, spec.ctx)


def test_cell_is_empty_below_level(settings):
    spec = CellSpec.build(3, 3, 2, [1, 2], settings=settings)
    assert enumerate_cell(spec, settings) == []
    assert kloosterman_sum(spec, settings).is_zero()


@pytest.mark.parametrize("p", [2, 3])
def test_gl3_cell_is_empty_when_first_step_is_short(settings, p):
    # a_1 < a_2 且 a_1 < 2m 时第二个尾部子式的赋值到不了 2ℓ-a_2
    spec = CellSpec.build(p, 3, 1, [1, 2], settings=settings)
    assert enumerate_cell(spec, settings) == []


def test_gl3_cell_elements(settings):
    spec = CellSpec.build(2, 3, 1, [1, 1], settings=settings)
    elements = enumerate_cell(spec, settings)
    assert len(elements) == 8
    keys = [element.key for element in elements]
    assert keys == sorted(keys)
    assert {key[1] for key in keys} == {1, 3}
    assert all(in_Km(element.g, 1) for element in elements)
    assert all(len(element.key) == len(upper_positions(3)) for element in elements)


def test_enumeration_budget_is_enforced(tight_settings):
    spec = CellSpec.build(3, 2, 1, [1], settings=tight_settings)
    with pytest.raises(Infeasible):
        enumerate_cell(spec, tight_settings)


def test_worker_count_does_not_change_the_sum(settings):
    spec = CellSpec.build(2, 3, 1, [2, 3], settings=settings)
    parallel = settings.model_copy(update={"enumeration_workers": 4})
    assert kloosterman_sum(spec, parallel) == kloosterman_sum(spec, settings)


@pytest.mark.parametrize(
    ("p", "n", "a"),
    [(2, 3, (1, 1)), (3, 3, (1, 1)), (2, 3, (2, 3)), (2, 3, (2, 2))],
)
def test_involution_conjugates_the_sum(settings, p, n, a):
    spec = CellSpec.build(p, n, 1, a, nu=[1, 2], nu_prime=[1, Fraction(1, p)], settings=settings)
    assert kloosterman_sum(spec.involuted(), settings) == kloosterman_sum(spec, settings).conj()


def test_negated_characters_conjugate_the_sum(settings):
    spec = CellSpec.build(3, 3, 1, [1, 1], settings=settings)
    assert kloosterman_sum(spec.negated(), settings) == kloosterman_sum(spec, settings).conj()


def test_restricted_lambdas():
    lambdas = restricted_lambdas(3, 2, 1)
    assert len(lambdas) == 9
    assert all(lam % 3 == 1 for lam in lambdas)


def test_s2_is_symmetric(settings):
    ctx = PrimeContext.for_cell(5, 2, 2, 1, settings)
    assert s2_restricted(1, 3, 2, 1, ctx) == s2_restricted(3, 1, 2, 1, ctx)


def test_s2_with_trivial_length_is_a_single_term(settings):
    ctx = PrimeContext.for_cell(3, 2, 0, 1, settings)
    assert s2_restricted(1, 1, 0, 1, ctx) == CycloSum.monomial(3, 1, 0)
    assert s2_restricted(Fraction(1, 3), Fraction(1, 3), 0, 1, ctx) == CycloSum.monomial(3, 1, 2)
    with pytest.raises(ConfigError):
        s2_restricted(1, 1, -1, 1, ctx)


@pytest.mark.parametrize(
    ("p", "m", "ell"),
    [*product([2, 3], [1, 2], [0, 1, 2, 3]), (5, 1, 2), (2, 3, 1)],
)
def test_twisted_decomposition_matches_s2(settings, p, m, ell):
    ctx = PrimeContext.for_cell(p, 2, ell, m, settings)
    assert s2_twisted_decomposition(1, 2, ell, m, ctx) == s2_restricted(1, 2, ell, m, ctx)


def test_unit_group_structure_covers_the_group():
    for p, m in ((2, 1), (2, 2), (2, 4), (3, 2), (5, 1)):
        factors, dlog = unit_group_structure(p, m)
        modulus = p**m
        assert sorted(dlog) == [k for k in range(modulus) if k % p]


def test_torus_slot_generators():
    assert torus_slot_generators(2, 1) == [-1, 5]
    assert torus_slot_generators(3, 2) == [10]


def test_canonical_uprime_reduces_into_grid():
    key = canonical_uprime({(0, 1): Fraction(10, 3)}, 2, 3, 1, 1)
    assert key == (1,)
    with pytest.raises(ConfigError):
        canonical_uprime({(0, 1): Fraction(1, 9)}, 2, 3, 1, 1)


def test_v_w_count():
    size, points = v_w_count(2, 1, 3, 3)
    assert size == 81
    assert sum(1 for _ in points) == 81


@pytest.mark.parametrize(("p", "a"), [(3, (1,)), (3, (2,)), (5, (1,))])
def test_orbits_partition_gl2_cell(settings, p, a):
    spec = CellSpec.build(p, 2, 1, a, settings=settings)
    elements = enumerate_cell(spec, settings)
    decomposition = orbit_decompose(spec, settings, elements)
    assert decomposition.total == len(elements)


def test_orbits_partition_gl3_cell(settings):
    spec = CellSpec.build(2, 3, 1, [2, 3], settings=settings)
    elements = enumerate_cell(spec, settings)
    decomposition = orbit_decompose(spec, settings, elements)
    assert decomposition.total == len(elements)
    keys = [rep.key for rep in decomposition.representatives]
    assert len(set(keys)) == len(keys)


@pytest.mark.parametrize(
    ("p", "n", "a"),
    [(3, 2, (1,)), (3, 2, (2,)), (2, 2, (2,)), (2, 3, (1, 1)), (2, 3, (2, 3)), (3, 3, (1, 1))],
)
def test_stevens_identity(settings, p, n, a):
    assert stevens_identity_check(CellSpec.build(p, n, 1, a, settings=settings), settings)


def test_stevens_identity_with_general_characters(settings):
    spec = CellSpec.build(3, 2, 1, [2], nu=[Fraction(2, 3)], nu_prime=[5], settings=settings)
    assert stevens_identity_check(spec, settings)
