import csv
import json
import math
from fractions import Fraction
from pathlib import Path

import pytest
from pydantic import ValidationError

from app.core.errors import ConfigError
from app.models.enums import CheckName, PathKind
from app.schemas.kloosterman import GermRequest, OrbitalRequest
from app.schemas.report import SweepConfig
from app.services.bounds_harness import (
    CSV_HEADER,
    ExactBound,
    bound_general_nu_exact,
    bound_thm_w8_exact,
    bound_thm_wn,
    bound_thm_wn_exact,
    compute_germ_report,
    compute_orbital_report,
    compute_sum_report,
    constant_c8,
    constant_cn,
    delta_weight,
    germ_decay_sweep,
    germ_delta_limit,
    grid_points,
    min_bound,
    nontriviality_threshold,
    proved_bound,
    run_sweep,
    thm_w8_forms,
    thm_wn_forms,
    trivial_bound,
    uniform_exponent_factor,
    weil_bound,
    weil_bound_exact,
)
from app.services.kloosterman import CellSpec


# ---------------------------------------------------------------------------
# 上界公式
# ---------------------------------------------------------------------------


def test_weil_bound_values():
    assert weil_bound(1, 1, 1, 1, 3) == pytest.approx(27.0)
    assert weil_bound(1, 1, 0, 1, 2) == pytest.approx(4 * math.sqrt(2))
    assert weil_bound_exact(1, 1, 1, 1, 3) == ExactBound(3, Fraction(9), Fraction(2))


def test_weil_bound_uses_character_valuations():
    # gcd 项取 min(m+v(ν), m+v(ν′), ℓ+m)
    loose = weil_bound_exact(1, 9, 3, 1, 3)
    tight = weil_bound_exact(Fraction(1, 3), 9, 3, 1, 3)
    assert loose.exponent == Fraction(1 + 1 + 3 + 1, 2)
    assert tight.exponent == Fraction(1 + 0 + 3 + 1, 2)
    assert tight.le(loose)


def test_weil_bound_rejects_bad_characters():
    with pytest.raises(ConfigError):
        weil_bound_exact(0, 1, 1, 1, 3)
    with pytest.raises(ConfigError):
        weil_bound_exact(Fraction(1, 9), 1, 1, 1, 3)


def test_exponent_constants():
    assert uniform_exponent_factor(3) == Fraction(3, 4)
    assert uniform_exponent_factor(4) == Fraction(13, 14)
    assert germ_delta_limit(2) == Fraction(1, 4)
    assert germ_delta_limit(3) == Fraction(1, 8)
    assert germ_delta_limit(4) == Fraction(1, 28)


def test_constant_c8_example():
    bound = constant_c8(2, 1, (1, 1, 1))
    assert bound.constant_sq == 52488**2
    assert bound.exponent == 12
    assert bound.to_float() == pytest.approx(2**15 * 3**8)


def test_constant_cn_formula():
    bound = constant_cn(3, 2, 1, 1)
    assert bound.constant_sq == 2**16 * 4**16 * 5**27
    assert bound.exponent == 26


def test_exact_bound_comparisons():
    bound = ExactBound(2, Fraction(4), Fraction(3, 2))
    assert bound.to_float() == pytest.approx(4 * math.sqrt(2))
    assert bound.admits(5.656)
    assert not bound.admits(5.657)
    assert bound.admits(5.657, tolerance=1e-3)
    assert bound.admits(0.0)
    assert bound.ratio(bound.to_float()) == pytest.approx(1.0)
    smaller = bound.shifted(Fraction(-1, 2))
    assert smaller.le(bound) and not bound.le(smaller)
    assert min_bound(bound, smaller, bound.scaled(4)) == smaller
    with pytest.raises(ConfigError):
        bound.le(ExactBound(3, Fraction(1), Fraction(0)))


def test_huge_bounds_overflow_to_infinity():
    assert ExactBound(2, Fraction(1), Fraction(5000)).to_float() == math.inf


def test_thm_wn_forms_on_balanced_ladder(settings):
    spec = CellSpec.build(2, 3, 1, (1, 1), settings=settings)
    forms = thm_wn_forms(spec)
    assert set(forms) == {"min_form", "uniform"}
    assert forms["min_form"].exponent == 26 + Fraction(9, 2)
    assert forms["uniform"].exponent == 26 + Fraction(9, 2)
    assert bound_thm_wn_exact(spec) == forms["min_form"]


def test_thm_wn_requires_rank_three(settings):
    with pytest.raises(ConfigError):
        bound_thm_wn(CellSpec.build(3, 2, 1, (1,), settings=settings))


def test_thm_w8_picks_smallest_form(settings):
    spec = CellSpec.build(2, 4, 1, (2, 1, 1), settings=settings)
    forms = thm_w8_forms(spec)
    assert forms["min_form"].exponent == 18
    assert forms["uniform"].exponent == 12 + Fraction(13, 2)
    assert bound_thm_w8_exact(spec) == ExactBound(2, Fraction(165888**2), Fraction(18))


def test_general_character_bound_reduces_to_unit_case(settings):
    spec4 = CellSpec.build(2, 4, 1, (2, 1, 1), settings=settings)
    assert bound_general_nu_exact(spec4) == bound_thm_w8_exact(spec4)
    spec3 = CellSpec.build(3, 3, 1, (2, 1), settings=settings)
    assert bound_general_nu_exact(spec3) == bound_thm_wn_exact(spec3)
    twisted = CellSpec.build(3, 3, 1, (2, 1), nu=[Fraction(1, 3), 1], settings=settings)
    assert bound_general_nu_exact(twisted).le(bound_general_nu_exact(spec3))
    assert not bound_general_nu_exact(spec3).le(bound_general_nu_exact(twisted))


def test_proved_bound_selection(settings):
    assert proved_bound(CellSpec.build(3, 2, 1, (1,), settings=settings)) == weil_bound_exact(1, 1, 1, 1, 3)
    assert proved_bound(CellSpec.build(3, 2, 2, (1,), settings=settings)) is None
    assert proved_bound(CellSpec.build(3, 1, 1, (), settings=settings)) is None
    spec = CellSpec.build(2, 3, 1, (1, 1), settings=settings)
    assert proved_bound(spec) == bound_general_nu_exact(spec)


def test_trivial_bound_and_delta_weight():
    assert trivial_bound(2, (1, 1)).exponent == Fraction(202, 100)
    assert delta_weight(2, (1, 1), "1/4").exponent == -1
    assert delta_weight(3, (2,), 0.0).exponent == -2
    with pytest.raises(ConfigError):
        delta_weight(2, (1,), "3/4")
    with pytest.raises(ConfigError):
        delta_weight(2, (1,), "abc")


def test_nontriviality_threshold():
    loose = nontriviality_threshold(3, 2, 1, Fraction(1, 100))
    generous = nontriviality_threshold(3, 2, 1, Fraction(1))
    assert loose is not None and generous is not None
    assert generous <= loose
    assert nontriviality_threshold(3, 2, 1, Fraction(1, 100), limit=4) is None


# ---------------------------------------------------------------------------
# 单次计算
# ---------------------------------------------------------------------------


def test_sum_report_for_gl2(settings):
    spec = CellSpec.build(3, 2, 1, (1,), settings=settings)
    report = compute_sum_report(spec, settings=settings)
    assert report.cell_size == 3
    assert report.magnitude == pytest.approx(3.0)
    assert report.bound == pytest.approx(27.0)
    assert report.ratio == pytest.approx(1 / 9)
    assert report.path == PathKind.GENERIC.value
    assert report.params["units"] == [1, -1]
    with pytest.raises(ConfigError):
        compute_sum_report(spec, fast_gl4=True, settings=settings)


def test_sum_report_on_fast_path(settings):
    spec = CellSpec.build(2, 4, 1, (1, 2, 1), settings=settings)
    fast = compute_sum_report(spec, fast_gl4=True, settings=settings)
    generic = compute_sum_report(spec, settings=settings)
    assert fast.path == PathKind.GL4_FAST.value
    assert fast.cell_size == generic.cell_size == 64
    assert fast.magnitude == pytest.approx(generic.magnitude)


def test_orbital_report(settings):
    report = compute_orbital_report(OrbitalRequest(p=2, exponents=[1, 0, -1], oracle=True), settings)
    assert report.dr_value == "3"
    assert report.decomposition_count == 2
    assert report.bruteforce == 3
    assert report.r_estimate >= report.decomposition_count


def test_germ_reports(settings):
    longest = compute_germ_report(GermRequest(n=2, p=3, a=[1]), settings)
    assert longest.composition == [2]
    assert longest.normalization == "1/3"
    assert longest.magnitude == pytest.approx(1.0)
    blocks = compute_germ_report(GermRequest(n=3, p=3, a=[1, 0], units=[1, -1, 1], relevant=[2, 1]), settings)
    assert blocks.composition == [2, 1]
    assert blocks.magnitude == pytest.approx(1.0)


def test_germ_decay_sweep(settings):
    template = CellSpec.build(3, 2, 1, (1,), settings=settings)
    rows = germ_decay_sweep(2, "1/8", [[1], [2]], template, settings)
    assert [row.a for row in rows] == [[1], [2]]
    assert rows[0].magnitude == pytest.approx(3 ** (-0.75))
    assert rows[0].detail["delta"] == "1/8"
    with pytest.raises(ConfigError):
        germ_decay_sweep(2, "1/4", [[1]], template, settings)
    with pytest.raises(ConfigError):
        germ_decay_sweep(3, "1/16", [[1, 1]], template, settings)


# ---------------------------------------------------------------------------
# 扫描
# ---------------------------------------------------------------------------


def _read_csv(path: str) -> list[list[str]]:
    with open(path, encoding="utf-8", newline="") as handle:
        return list(csv.reader(handle))


def test_weil_sweep_writes_reports(settings):
    config = SweepConfig(check=CheckName.WEIL, p=[2, 3], m=[1, 2], ell=[0, 1, 2, 3])
    summary = run_sweep(config, settings)
    assert summary.total == 16
    assert summary.passed == 16
    assert summary.ok
    assert summary.max_ratio is not None and summary.max_ratio <= 1
    rows = _read_csv(summary.csv_path)
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 17
    payload = json.loads(Path(summary.json_path).read_text(encoding="utf-8"))
    assert payload["check"] == "weil"
    assert all(row["detail"]["twisted_equal"] for row in payload["rows"])


def test_weil_sweep_respects_explicit_output(settings, tmp_path):
    config = SweepConfig(check=CheckName.WEIL, p=[3], ell=[1])
    summary = run_sweep(config, settings, out=tmp_path / "custom" / "weil.json")
    assert summary.json_path == str(tmp_path / "custom" / "weil.json")
    assert summary.csv_path == str(tmp_path / "custom" / "weil.csv")


def test_dr_sweep_agrees_with_bruteforce(settings):
    summary = run_sweep(SweepConfig(check=CheckName.DR, n=[2, 3], p=[2, 3], height=1), settings)
    assert summary.total > 0
    assert summary.failed == 0
    assert summary.passed == summary.total


def test_dr_sweep_appends_explicit_cocharacters(settings):
    config = SweepConfig(check=CheckName.DR, n=[2], p=[2, 3], height=1, exponents=[[1, 0, 0, -1]])
    points = grid_points(config)
    assert [point["lambda"] for point in points] == [(0, 0), (1, -1), (0, 0), (1, -1), (1, 0, 0, -1), (1, 0, 0, -1)]
    summary = run_sweep(SweepConfig(check=CheckName.DR, n=[], p=[2], exponents=[[1, 0, 0, -1]]), settings)
    assert summary.passed == summary.total == 1
    payload = json.loads(Path(summary.json_path).read_text(encoding="utf-8"))
    assert payload["rows"][0]["cell_size"] == 9


def test_stevens_sweep(settings):
    summary = run_sweep(SweepConfig(check=CheckName.STEVENS, n=[2], p=[3], a_values=[1, 2]), settings)
    assert summary.total == 2
    assert summary.ok


def test_thm_wn_sweep_reports_thresholds(settings):
    summary = run_sweep(SweepConfig(check=CheckName.THM_WN, n=[3], p=[2], a_values=[1]), settings)
    assert summary.passed == 1
    assert isinstance(summary.thresholds["n=3,p=2,m=1"], int)
    payload = json.loads(Path(summary.json_path).read_text(encoding="utf-8"))
    detail = payload["rows"][0]["detail"]
    assert detail["cell_count_holds"]
    assert detail["orbital"] == "3"
    assert detail["nontrivial"] is False


def test_thm_wn_sweep_rejects_small_rank(settings):
    with pytest.raises(ConfigError):
        run_sweep(SweepConfig(check=CheckName.THM_WN, n=[2], p=[2]), settings)


def test_gl4_sweeps(settings):
    dual = run_sweep(SweepConfig(check=CheckName.GL4_DUAL, p=[2], exponents=[[1, 2, 1], [2, 2, 2]]), settings)
    assert dual.passed == dual.total == 2
    payload = json.loads(Path(dual.json_path).read_text(encoding="utf-8"))
    assert [row["cell_size"] for row in payload["rows"]] == [64, 128]
    assert all(row["detail"]["sums_equal"] for row in payload["rows"])
    fast = run_sweep(SweepConfig(check=CheckName.THM_W8, p=[2], exponents=[[1, 2, 1]]), settings)
    assert fast.passed == 1


def test_germ_decay_sweep_only_reports(settings):
    config = SweepConfig(check=CheckName.GERM_DECAY, n=[2], p=[3], rays=[[1], [2]], delta="1/8")
    summary = run_sweep(config, settings)
    assert summary.total == 2
    assert summary.passed == 0 and summary.failed == 0
    with pytest.raises(ValidationError):
        SweepConfig(check=CheckName.GERM_DECAY, n=[2], p=[3], rays=[[1]])
    with pytest.raises(ConfigError):
        grid_points(SweepConfig(check=CheckName.GERM_DECAY, n=[2], p=[3], rays=[[1]], delta="1/2"))


def test_budget_overflow_is_skipped(tight_settings):
    summary = run_sweep(SweepConfig(check=CheckName.STEVENS, n=[2], p=[3], a_values=[1]), tight_settings)
    assert summary.skipped == summary.total == 1
    assert summary.ok
    rows = _read_csv(summary.csv_path)
    assert rows[1][CSV_HEADER.index("path")] == "skipped"


def test_grid_points_fix_rank_for_gl4_checks():
    points = grid_points(SweepConfig(check=CheckName.GL4_DUAL, n=[2, 3], p=[2], a_values=[1]))
    assert [point["n"] for point in points] == [4]
    assert points[0]["a"] == (1, 1, 1)


GRIDS = Path(__file__).resolve().parents[2] / "grids"


def _shipped(check: CheckName) -> SweepConfig:
    payload = json.loads((GRIDS / f"{check.value}.json").read_text(encoding="utf-8"))
    return SweepConfig(check=check, **payload)


def test_shipped_grids_cover_required_points():
    weil = grid_points(_shipped(CheckName.WEIL))
    assert {(point["p"], point["m"], point["ell"]) for point in weil} == {
        (p, m, ell) for p in (2, 3) for m in (1, 2) for ell in range(4)
    }
    dr = [point["lambda"] for point in grid_points(_shipped(CheckName.DR))]
    assert (3, 0, -3) in dr and (1, 0, 0, -1) in dr
    dual = grid_points(_shipped(CheckName.GL4_DUAL))
    assert [point["a"] for point in dual] == [(1, 2, 1), (2, 2, 2)]


def test_sweep_config_validation():
    with pytest.raises(ValidationError):
        SweepConfig(check=CheckName.WEIL, p=[4])
    with pytest.raises(ValidationError):
        SweepConfig(check=CheckName.STEVENS, m=[0])
    with pytest.raises(ValidationError):
        SweepConfig(check=CheckName.STEVENS, nu=["1/0"])
