"""显式上界常数、验证扫描与 JSON/CSV 报告。

所有上界都表示成 sqrt(constant_sq)·p^{exponent}，constant_sq 与 exponent 都是有理数。
与 |Kl| 的比较化成 x^s <= p^r 形式的精确整数比较，只有 |Kl| 本身是浮点数。
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from pathlib import Path
from typing import Any, Callable, Sequence

from loguru import logger

from app.core.config import Settings, get_settings
from app.core.errors import ConfigError, Infeasible
from app.core.logging_config import log_key_event, log_scope
from app.core.scheduler import SWEEP_WORKERS, resolve_workers, run_partitioned
from app.models.enums import CheckName, PathKind
from app.schemas.kloosterman import CellParams, GermReport, GermRequest, OrbitalReport, OrbitalRequest, SumReport
from app.schemas.report import BoundReportRow, SweepConfig, SweepSummary
from app.services.gl4_fast import accepted_params, kloosterman_gl4_fast
from app.services.group_geometry import RelevantWeyl
from app.services.kloosterman import (
    CellSpec,
    enumerate_cell,
    kloosterman_sum,
    s2_restricted,
    s2_twisted_decomposition,
    stevens_identity_check,
)
from app.services.orbital import (
    decomposition_count_R,
    germ_longest,
    germ_relevant,
    orbital_bruteforce,
    orbital_integral_DR,
    r_estimate,
    split_torus_blocks,
    torus_from_cocharacter,
)
from app.services.padic_core import PrimeContext, cyclo_magnitude, fraction_valuation

CSV_HEADER = ("p", "m", "n", "a", "magnitude", "bound", "ratio", "cell_size", "path", "elapsed_ms")
DEFAULT_EPSILON = Fraction(1, 100)


def _within_power(x: Fraction, p: int, q: Fraction) -> bool:
    """x <= p^q，x > 0，q 为有理数：比较 x^s 与 p^r。"""

    return x**q.denominator <= Fraction(p) ** q.numerator


@dataclass(frozen=True)
class ExactBound:
    p: int
    constant_sq: Fraction
    exponent: Fraction

    def __post_init__(self) -> None:
        if self.constant_sq < 0:
            raise ConfigError("上界常数的平方不能为负")

    def shifted(self, exponent: Fraction | int) -> "ExactBound":
        return ExactBound(self.p, self.constant_sq, self.exponent + Fraction(exponent))

    def scaled(self, factor_sq: Fraction | int) -> "ExactBound":
        return ExactBound(self.p, self.constant_sq * Fraction(factor_sq), self.exponent)

    def log(self) -> float:
        if self.constant_sq == 0:
            return -math.inf
        constant = math.log(self.constant_sq.numerator) - math.log(self.constant_sq.denominator)
        return constant / 2 + float(self.exponent) * math.log(self.p)

    def to_float(self) -> float:
        try:
            return math.exp(self.log())
        except OverflowError:
            return math.inf

    def le(self, other: "ExactBound") -> bool:
        if self.p != other.p:
            raise ConfigError(f"不能比较 p={self.p} 与 p={other.p} 的上界")
        if self.constant_sq == 0:
            return True
        if other.constant_sq == 0:
            return False
        return _within_power(self.constant_sq / other.constant_sq, self.p, 2 * (other.exponent - self.exponent))

    def admits(self, magnitude: float, tolerance: float = 0.0) -> bool:
        """magnitude <= (1 + tolerance)·bound。"""

        lhs = (Fraction(magnitude) / (1 + Fraction(tolerance))) ** 2
        if lhs == 0:
            return True
        if self.constant_sq == 0:
            return False
        return _within_power(lhs / self.constant_sq, self.p, 2 * self.exponent)

    def ratio(self, magnitude: float) -> float:
        value = self.to_float()
        if value == 0:
            return 0.0 if magnitude == 0 else math.inf
        return magnitude / value

    def to_payload(self) -> dict:
        return {"constant_sq": str(self.constant_sq), "exponent": str(self.exponent), "value": self.to_float()}


def min_bound(*bounds: ExactBound) -> ExactBound:
    best = bounds[0]
    for bound in bounds[1:]:
        if bound.le(best) and not best.le(bound):
            best = bound
    return best


# ---------------------------------------------------------------------------
# 上界公式
# ---------------------------------------------------------------------------


def weil_bound_exact(nu: Fraction | int, nu_prime: Fraction | int, ell: int, m: int, p: int) -> ExactBound:
    """(ℓ+m+1)·p^{m/2}·(|p^mν|^{-1}, |p^mν′|^{-1}, p^{ℓ+m})^{1/2}·p^{(ℓ+m)/2}。"""

    if Fraction(nu) == 0 or Fraction(nu_prime) == 0:
        raise ConfigError("ν 与 ν′ 不能为 0")
    shifts = [m + fraction_valuation(value, p) for value in (nu, nu_prime)]
    if min(shifts) < 0:
        raise ConfigError(f"ν={nu}, ν′={nu_prime} 不在 p^{{-m}}ℤ_p 中")
    gcd_exponent = min(*shifts, ell + m)
    return ExactBound(p, Fraction((ell + m + 1) ** 2), Fraction(m + gcd_exponent + ell + m, 2))


def weil_bound(nu: Fraction | int, nu_prime: Fraction | int, ell: int, m: int, p: int) -> float:
    return weil_bound_exact(nu, nu_prime, ell, m, p).to_float()


def uniform_exponent_factor(n: int) -> Fraction:
    """1 - 1/(4n²-18n+22)：n=3 时为 3/4，n=4 时为 13/14。"""

    return 1 - Fraction(1, 4 * n * n - 18 * n + 22)


def germ_delta_limit(n: int) -> Fraction:
    return Fraction(1, 8 * n * n - 36 * n + 44)


def _outer_pair(a: Sequence[int]) -> tuple[int, int]:
    return max(a[0], a[-1]), min(a[0], a[-1])


def _wn_polynomial_sq(n: int, ell: int, m: int) -> Fraction:
    """C_n 中 2^{n²-1}·(ℓ+(n-1)m+1)^{n²-1}·((n-1)ℓ+n)^{n³/2} 的平方。"""

    power = 2 * (n * n - 1)
    return Fraction(2**power * (ell + (n - 1) * m + 1) ** power * ((n - 1) * ell + n) ** (n**3))


def _wn_forms(n: int, m: int, a: Sequence[int], base: ExactBound) -> dict[str, ExactBound]:
    ell = max(a)
    rho, sigma = _outer_pair(a)
    middle = sum(a[1:-1])
    level = Fraction(n * (n - 1) * m, 2)
    first = sigma + middle + Fraction(rho, 2) + level
    second = Fraction(ell, 2) + 2 * sigma + (n - 3) * rho + middle - ell + level
    uniform = uniform_exponent_factor(n) * sum(a) + level
    min_form = min_bound(base.shifted(first), base.shifted(second))
    return {"min_form": min_form, "uniform": base.shifted(uniform)}


def constant_cn(n: int, p: int, m: int, ell: int) -> ExactBound:
    return ExactBound(p, _wn_polynomial_sq(n, ell, m), Fraction((2 * n + 7) * (n - 1) * m))


def _require_wn(n: int) -> None:
    if n < 3:
        raise ConfigError(f"GL(n) 最长元上界要求 n >= 3，实际 n={n}")


def thm_wn_forms(spec: CellSpec) -> dict[str, ExactBound]:
    _require_wn(spec.n)
    return _wn_forms(spec.n, spec.m, spec.a, constant_cn(spec.n, spec.ctx.p, spec.m, spec.ell))


def bound_thm_wn_exact(spec: CellSpec) -> ExactBound:
    forms = thm_wn_forms(spec)
    return min_bound(forms["min_form"], forms["uniform"])


def bound_thm_wn(spec: CellSpec) -> float:
    return bound_thm_wn_exact(spec).to_float()


def _w8_polynomial_sq(m: int, a: Sequence[int]) -> Fraction:
    ell = max(a)
    rho, sigma = _outer_pair(a)
    r = a[1]
    value = 8 * (ell + m + 1) ** 3 * (rho + m + 1) * (r + m + 1) ** 2 * (sigma + m + 1) ** 2
    return Fraction(value * value)


def _w8_forms(m: int, a: Sequence[int], base: ExactBound) -> dict[str, ExactBound]:
    rho, sigma = _outer_pair(a)
    r = a[1]
    first = r + sigma + Fraction(rho, 2) + 3 * m
    second = rho + Fraction(3 * sigma, 2) + Fraction(r, 2) + 3 * m
    uniform = Fraction(7 * sum(a), 8) + 3 * m
    min_form = min_bound(base.shifted(first), base.shifted(second))
    return {"min_form": min_form, "uniform": base.shifted(uniform)}


def constant_c8(p: int, m: int, a: Sequence[int]) -> ExactBound:
    """8p^{12m}(ℓ+m+1)³(ϱ+m+1)(r+m+1)²(σ+m+1)²，r 为中间指数。"""

    return ExactBound(p, _w8_polynomial_sq(m, a), Fraction(12 * m))


def _require_n4(spec: CellSpec) -> None:
    if spec.n != 4:
        raise ConfigError(f"GL(4) 上界只适用于 n=4，实际 n={spec.n}")


def thm_w8_forms(spec: CellSpec) -> dict[str, ExactBound]:
    _require_n4(spec)
    return _w8_forms(spec.m, spec.a, constant_c8(spec.ctx.p, spec.m, spec.a))


def bound_thm_w8_exact(spec: CellSpec) -> ExactBound:
    forms = thm_w8_forms(spec)
    return min_bound(forms["min_form"], forms["uniform"])


def bound_thm_w8(spec: CellSpec) -> float:
    return bound_thm_w8_exact(spec).to_float()


def _character_gcd_exponent(spec: CellSpec) -> Fraction:
    """Σ_j (|ν_j ν′_{n-j} p^{2m}|^{-1}, p^{ℓ+m})^{1/2} 的 p 指数。"""

    p, n, m = spec.ctx.p, spec.n, spec.m
    total = Fraction(0)
    for j in range(1, n):
        shift = fraction_valuation(spec.nu[j - 1], p) + fraction_valuation(spec.nu_prime[n - j - 1], p) + 2 * m
        total += Fraction(min(shift, spec.ell + m), 2)
    return total


def constant_dn(spec: CellSpec) -> ExactBound:
    n, m = spec.n, spec.m
    exponent = 2 * (n + 3) * (n - 1) * m + _character_gcd_exponent(spec)
    return ExactBound(spec.ctx.p, _wn_polynomial_sq(n, spec.ell, m), exponent)


def constant_d8(spec: CellSpec) -> ExactBound:
    _require_n4(spec)
    return ExactBound(spec.ctx.p, _w8_polynomial_sq(spec.m, spec.a), 9 * spec.m + _character_gcd_exponent(spec))


def bound_general_nu_exact(spec: CellSpec) -> ExactBound:
    """一般 ν, ν′ 的上界：n=4 用 D_8 形式，其余 n >= 3 用 D_n 形式。"""

    _require_wn(spec.n)
    if spec.n == 4:
        forms = _w8_forms(spec.m, spec.a, constant_d8(spec))
    else:
        forms = _wn_forms(spec.n, spec.m, spec.a, constant_dn(spec))
    return min_bound(forms["min_form"], forms["uniform"])


def bound_general_nu(spec: CellSpec) -> float:
    return bound_general_nu_exact(spec).to_float()


def proved_bound(spec: CellSpec) -> ExactBound | None:
    """给定胞腔可用的已证上界；ℓ < m 或 n = 1 时没有可引用的定理。"""

    if spec.n == 1 or spec.ell < spec.m:
        return None
    if spec.n == 2:
        return weil_bound_exact(spec.nu[0], spec.nu_prime[0], spec.ell, spec.m, spec.ctx.p)
    return bound_general_nu_exact(spec)


def trivial_bound(p: int, a: Sequence[int], epsilon: Fraction = DEFAULT_EPSILON) -> ExactBound:
    return ExactBound(p, Fraction(1), (1 + epsilon) * sum(a))


def _balanced(n: int, total: int) -> list[int]:
    quotient, remainder = divmod(total, n - 1)
    return [quotient + (1 if i < remainder else 0) for i in range(n - 1)]


def _beats_trivial(n: int, p: int, m: int, total: int, epsilon: Fraction) -> bool:
    a = _balanced(n, total)
    forms = _wn_forms(n, m, a, constant_cn(n, p, m, max(a)))
    return min_bound(forms["min_form"], forms["uniform"]).le(trivial_bound(p, a, epsilon))


def nontriviality_threshold(
    n: int,
    p: int,
    m: int,
    epsilon: Fraction = DEFAULT_EPSILON,
    limit: int = 10**6,
) -> int | None:
    """均衡指数向量上 C_n 形式的上界首次不超过 p^{(1+ε)Σa} 时的 Σa；超过 limit 返回 None。"""

    _require_wn(n)
    low = max(n - 1, (n - 1) * m)
    if _beats_trivial(n, p, m, low, epsilon):
        return low
    high = low
    while not _beats_trivial(n, p, m, high, epsilon):
        if high > limit:
            return None
        low, high = high, high * 2
    while high - low > 1:
        middle = (low + high) // 2
        if _beats_trivial(n, p, m, middle, epsilon):
            high = middle
        else:
            low = middle
    return high


def delta_weight(p: int, a: Sequence[int], delta: Fraction | float | str) -> ExactBound:
    """Δ^{1/2-δ}(c) = p^{-(1-2δ)Σa}，因为沿阶梯环面 Δ(c) = p^{-2Σa}。"""

    delta = _as_fraction(delta)
    if not 0 <= delta <= Fraction(1, 2):
        raise ConfigError(f"δ={delta} 不在 [0, 1/2] 内")
    return ExactBound(p, Fraction(1), -(1 - 2 * delta) * sum(a))


def _as_fraction(value: Fraction | float | str | int) -> Fraction:
    if isinstance(value, float):
        return Fraction(str(value))
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"无法解析有理数 {value!r}") from exc


# ---------------------------------------------------------------------------
# 单点求值
# ---------------------------------------------------------------------------


def _elapsed_ms(started: float) -> int:
    return int((time.perf_counter() - started) * 1000)


def _spec_row(spec: CellSpec, path: PathKind, **fields: Any) -> BoundReportRow:
    return BoundReportRow(
        p=spec.ctx.p,
        m=spec.m,
        n=spec.n,
        a=list(spec.a),
        units=list(spec.v),
        nu=[str(value) for value in spec.nu],
        nu_prime=[str(value) for value in spec.nu_prime],
        path=path,
        **fields,
    )


def _bound_fields(bound: ExactBound | None, magnitude: float, tolerance: float = 0.0) -> dict[str, Any]:
    if bound is None:
        return {"bound": None, "ratio": None}
    return {"bound": bound.to_float(), "ratio": bound.ratio(magnitude), "admitted": bound.admits(magnitude, tolerance)}


def compute_sum_report(spec: CellSpec, fast_gl4: bool = False, settings: Settings | None = None) -> SumReport:
    settings = settings or get_settings()
    started = time.perf_counter()
    if fast_gl4:
        if spec.n != 4:
            raise ConfigError("--fast-gl4 只适用于 n=4")
        cell_size = len(accepted_params(spec, settings))
        value = kloosterman_gl4_fast(spec, settings)
        path = PathKind.GL4_FAST
    else:
        elements = enumerate_cell(spec, settings)
        cell_size = len(elements)
        value = kloosterman_sum(spec, settings, elements)
        path = PathKind.GENERIC
    magnitude = cyclo_magnitude(value)
    complex_value = value.to_complex()
    fields = _bound_fields(proved_bound(spec), magnitude)
    fields.pop("admitted", None)
    return SumReport(
        params=spec.to_params(),
        cell_size=cell_size,
        sum=value.to_payload(),
        complex=[complex_value.real, complex_value.imag],
        magnitude=magnitude,
        path=path,
        elapsed_ms=_elapsed_ms(started),
        **fields,
    )


def spec_from_params(params: CellParams, settings: Settings | None = None) -> CellSpec:
    return CellSpec.build(
        params.p,
        params.n,
        params.m,
        params.a,
        v=params.units,
        nu=[Fraction(value) for value in params.nu] if params.nu else None,
        nu_prime=[Fraction(value) for value in params.nu_prime] if params.nu_prime else None,
        settings=settings,
    )


def compute_orbital_report(request: OrbitalRequest, settings: Settings | None = None) -> OrbitalReport:
    torus = torus_from_cocharacter(request.p, request.exponents, request.units, settings)
    value = orbital_integral_DR(torus)
    return OrbitalReport(
        exponents=request.exponents,
        dr_value=str(value),
        dr_float=float(value),
        decomposition_count=decomposition_count_R(torus),
        r_estimate=r_estimate(torus),
        bruteforce=orbital_bruteforce(torus, settings) if request.oracle else None,
    )


def compute_germ_report(request: GermRequest, settings: Settings | None = None) -> GermReport:
    """未给出组成时取最长元的芽；否则把阶梯环面按组成切块后取各块芽的乘积。"""

    spec = spec_from_params(request, settings)
    if request.relevant:
        w = RelevantWeyl(tuple(request.relevant))
        germ = germ_relevant(w, split_torus_blocks(w, spec.torus, spec.m, settings), settings)
        composition = list(w.composition)
    else:
        germ = germ_longest(spec, settings)
        composition = [spec.n]
    return GermReport(composition=composition, **germ.to_payload())


def _spec_from_point(point: dict, settings: Settings) -> CellSpec:
    return CellSpec.build(
        point["p"],
        point["n"],
        point["m"],
        point["a"],
        v=point.get("units"),
        nu=point.get("nu"),
        nu_prime=point.get("nu_prime"),
        settings=settings,
    )


def _check_stevens(point: dict, settings: Settings) -> BoundReportRow:
    started = time.perf_counter()
    spec = _spec_from_point(point, settings)
    elements = enumerate_cell(spec, settings)
    magnitude = cyclo_magnitude(kloosterman_sum(spec, settings, elements))
    holds = stevens_identity_check(spec, settings, elements)
    return _spec_row(
        spec,
        PathKind.GENERIC,
        cell_size=len(elements),
        magnitude=magnitude,
        passed=holds,
        elapsed_ms=_elapsed_ms(started),
    )


def _check_thm_wn(point: dict, settings: Settings) -> BoundReportRow:
    started = time.perf_counter()
    spec = _spec_from_point(point, settings)
    elements = enumerate_cell(spec, settings)
    magnitude = cyclo_magnitude(kloosterman_sum(spec, settings, elements))
    bound = bound_thm_wn_exact(spec)
    orbital = orbital_integral_DR(spec.torus)
    p, n, m = spec.ctx.p, spec.n, spec.m
    count_holds = len(elements) <= p ** (n * (n - 1) * m) * orbital
    fields = _bound_fields(bound, magnitude)
    admitted = fields.pop("admitted")
    return _spec_row(
        spec,
        PathKind.GENERIC,
        cell_size=len(elements),
        magnitude=magnitude,
        passed=admitted and count_holds,
        elapsed_ms=_elapsed_ms(started),
        detail={
            "orbital": str(orbital),
            "cell_count_holds": count_holds,
            "nontrivial": bound.le(trivial_bound(p, spec.a, point["epsilon"])),
            "forms": {name: form.to_payload() for name, form in thm_wn_forms(spec).items()},
        },
        **fields,
    )


def _check_thm_w8(point: dict, settings: Settings) -> BoundReportRow:
    started = time.perf_counter()
    spec = _spec_from_point(point, settings)
    cell_size = len(accepted_params(spec, settings))
    magnitude = cyclo_magnitude(kloosterman_gl4_fast(spec, settings))
    fields = _bound_fields(bound_thm_w8_exact(spec), magnitude)
    admitted = fields.pop("admitted")
    return _spec_row(
        spec,
        PathKind.GL4_FAST,
        cell_size=cell_size,
        magnitude=magnitude,
        passed=admitted,
        elapsed_ms=_elapsed_ms(started),
        detail={"forms": {name: form.to_payload() for name, form in thm_w8_forms(spec).items()}},
        **fields,
    )


def _check_gl4_dual(point: dict, settings: Settings) -> BoundReportRow:
    started = time.perf_counter()
    spec = _spec_from_point(point, settings)
    fast = kloosterman_gl4_fast(spec, settings)
    fast_size = len(accepted_params(spec, settings))
    elements = enumerate_cell(spec, settings)
    generic = kloosterman_sum(spec, settings, elements)
    magnitude = cyclo_magnitude(generic)
    agrees = fast == generic and fast_size == len(elements)
    if not agrees:
        log_key_event("ERROR", "GL(4) 闭式路径与通用枚举不一致: {}", spec.to_params())
    fields = _bound_fields(bound_thm_w8_exact(spec), magnitude)
    admitted = fields.pop("admitted")
    return _spec_row(
        spec,
        PathKind.GENERIC,
        cell_size=len(elements),
        magnitude=magnitude,
        passed=agrees and admitted,
        elapsed_ms=_elapsed_ms(started),
        detail={"fast_cell_size": fast_size, "sums_equal": fast == generic},
        **fields,
    )


def _check_weil(point: dict, settings: Settings) -> BoundReportRow:
    started = time.perf_counter()
    p, m, ell = point["p"], point["m"], point["ell"]
    nu, nu_prime = Fraction(point["nu"]), Fraction(point["nu_prime"])
    ctx = PrimeContext.for_cell(p, 2, ell, m, settings)
    value = s2_restricted(nu, nu_prime, ell, m, ctx)
    twisted = s2_twisted_decomposition(nu, nu_prime, ell, m, ctx)
    magnitude = cyclo_magnitude(value)
    fields = _bound_fields(weil_bound_exact(nu, nu_prime, ell, m, p), magnitude, settings.weil_tolerance)
    admitted = fields.pop("admitted")
    decomposes = twisted == value
    if not decomposes:
        log_key_event("ERROR", "S_2 的特征展开与直接求和不一致: p={} m={} ℓ={}", p, m, ell)
    return BoundReportRow(
        p=p,
        m=m,
        n=2,
        a=[ell],
        nu=[str(nu)],
        nu_prime=[str(nu_prime)],
        cell_size=p**ell,
        magnitude=magnitude,
        path=PathKind.S2,
        passed=admitted and decomposes,
        elapsed_ms=_elapsed_ms(started),
        detail={"twisted_equal": decomposes},
        **fields,
    )


def _check_dr(point: dict, settings: Settings) -> BoundReportRow:
    started = time.perf_counter()
    p, lam = point["p"], point["lambda"]
    torus = torus_from_cocharacter(p, lam, settings=settings)
    orbital = orbital_integral_DR(torus)
    count = orbital_bruteforce(torus, settings)
    holds = orbital == count
    if not holds:
        log_key_event("ERROR", "轨道积分公式 {} 与暴力计数 {} 不一致: λ={}", orbital, count, lam)
    return BoundReportRow(
        p=p,
        m=0,
        n=len(lam),
        a=list(lam),
        cell_size=count,
        magnitude=float(orbital),
        path=PathKind.GENERIC,
        passed=holds,
        elapsed_ms=_elapsed_ms(started),
        detail={
            "orbital": str(orbital),
            "bruteforce": count,
            "decompositions": decomposition_count_R(torus),
            "r_estimate": r_estimate(torus),
        },
    )


def germ_decay_row(spec: CellSpec, delta: Fraction, settings: Settings | None = None) -> BoundReportRow:
    started = time.perf_counter()
    settings = settings or get_settings()
    elements = enumerate_cell(spec, settings)
    germ = germ_longest(spec, settings, elements)
    weight = delta_weight(spec.ctx.p, spec.a, delta)
    return _spec_row(
        spec,
        PathKind.GENERIC,
        cell_size=len(elements),
        magnitude=germ.magnitude() * weight.to_float(),
        elapsed_ms=_elapsed_ms(started),
        detail={"germ": germ.magnitude(), "weight": weight.to_float(), "delta": str(delta)},
    )


def germ_decay_sweep(
    n: int,
    delta: Fraction | float | str,
    rays: Sequence[Sequence[int]],
    template: CellSpec,
    settings: Settings | None = None,
) -> list[BoundReportRow]:
    """沿射线记录 |K_e^{w_{G_n}}(c)|·Δ^{1/2-δ}(c)，只报告数值，不做渐近断言。"""

    delta = _as_fraction(delta)
    if not 0 < delta < germ_delta_limit(n):
        raise ConfigError(f"δ={delta} 必须在 (0, {germ_delta_limit(n)}) 内")
    if template.n != n:
        raise ConfigError(f"模板的 n={template.n} 与 n={n} 不一致")
    rows = []
    for a in rays:
        spec = CellSpec.build(
            template.ctx.p,
            n,
            template.m,
            a,
            v=template.v,
            nu=template.nu,
            nu_prime=template.nu_prime,
            settings=settings,
        )
        rows.append(germ_decay_row(spec, delta, settings))
    return rows


def _check_germ_decay(point: dict, settings: Settings) -> BoundReportRow:
    spec = _spec_from_point(point, settings)
    return germ_decay_row(spec, point["delta"], settings)


# ---------------------------------------------------------------------------
# 扫描
# ---------------------------------------------------------------------------


def _exponent_vectors(config: SweepConfig, n: int) -> list[tuple[int, ...]]:
    if config.exponents is not None:
        return [tuple(a) for a in config.exponents if len(a) == n - 1]
    return list(product(config.a_values, repeat=n - 1))


def _cell_extras(config: SweepConfig, n: int) -> dict:
    return {
        "units": config.units if config.units is not None and len(config.units) == n else None,
        "nu": config.nu if config.nu is not None and len(config.nu) == n - 1 else None,
        "nu_prime": config.nu_prime if config.nu_prime is not None and len(config.nu_prime) == n - 1 else None,
    }


def _decomposable_cocharacters(n: int, height: int) -> list[tuple[int, ...]]:
    found = []
    for lam in product(range(-height, height + 1), repeat=n):
        if sum(lam) != 0:
            continue
        partial, ok = 0, True
        for value in lam:
            partial += value
            ok = ok and partial >= 0
        if ok:
            found.append(lam)
    return found


def grid_points(config: SweepConfig) -> list[dict]:
    """按网格顺序展开参数点；thm-w8 与 gl4-dual 固定 n=4，忽略 config.n。"""

    check = config.check
    epsilon = _as_fraction(config.epsilon)
    points: list[dict] = []
    if check == CheckName.WEIL:
        nu = config.nu[0] if config.nu else "1"
        nu_prime = config.nu_prime[0] if config.nu_prime else "1"
        for p, m, ell in product(config.p, config.m, config.ell):
            points.append({"p": p, "m": m, "ell": ell, "nu": nu, "nu_prime": nu_prime})
        return points
    if check == CheckName.DR:
        for n, p in product(config.n, config.p):
            points.extend({"p": p, "lambda": lam} for lam in _decomposable_cocharacters(n, config.height))
        # exponents 在 dr 检查里是额外的余特征，逐个 p 追加
        for p in config.p:
            points.extend({"p": p, "lambda": tuple(lam)} for lam in config.exponents or [])
        return points
    if check == CheckName.THM_WN:
        for n in config.n:
            _require_wn(n)
    sizes = [4] if check in (CheckName.THM_W8, CheckName.GL4_DUAL) else config.n
    for n, p, m in product(sizes, config.p, config.m):
        if check == CheckName.GERM_DECAY:
            vectors = [tuple(a) for a in config.rays if len(a) == n - 1]
        else:
            vectors = _exponent_vectors(config, n)
        for a in vectors:
            point = {"n": n, "p": p, "m": m, "a": a, "epsilon": epsilon, **_cell_extras(config, n)}
            if check == CheckName.GERM_DECAY:
                delta = _as_fraction(config.delta)
                if not 0 < delta < germ_delta_limit(n):
                    raise ConfigError(f"δ={delta} 必须在 (0, {germ_delta_limit(n)}) 内")
                point["delta"] = delta
            points.append(point)
    return points


_EVALUATORS: dict[CheckName, Callable[[dict, Settings], BoundReportRow]] = {
    CheckName.STEVENS: _check_stevens,
    CheckName.WEIL: _check_weil,
    CheckName.DR: _check_dr,
    CheckName.THM_WN: _check_thm_wn,
    CheckName.THM_W8: _check_thm_w8,
    CheckName.GL4_DUAL: _check_gl4_dual,
    CheckName.GERM_DECAY: _check_germ_decay,
}


def _skipped_row(point: dict, reason: str) -> BoundReportRow:
    if "lambda" in point:
        n, a = len(point["lambda"]), list(point["lambda"])
    elif "ell" in point:
        n, a = 2, [point["ell"]]
    else:
        n, a = point["n"], list(point["a"])
    return BoundReportRow(
        p=point["p"],
        m=point.get("m", 0),
        n=n,
        a=a,
        path=PathKind.SKIPPED,
        detail={"reason": reason},
    )


def evaluate_sweep(config: SweepConfig, settings: Settings | None = None) -> list[BoundReportRow]:
    settings = settings or get_settings()
    evaluator = _EVALUATORS[config.check]
    points = grid_points(config)

    def evaluate(point: dict) -> BoundReportRow:
        try:
            return evaluator(point, settings)
        except Infeasible as exc:
            logger.warning("扫描点超出预算，记为 skipped: {}", exc)
            return _skipped_row(point, str(exc))

    workers = resolve_workers(config.workers or settings.sweep_workers, SWEEP_WORKERS)
    return run_partitioned(evaluate, points, workers, f"sweep-{config.check.value}")


def summarize(config: SweepConfig, rows: Sequence[BoundReportRow]) -> SweepSummary:
    ratios = [row.ratio for row in rows if row.ratio is not None]
    summary = SweepSummary(
        check=config.check,
        total=len(rows),
        passed=sum(1 for row in rows if row.passed is True),
        failed=sum(1 for row in rows if row.passed is False),
        skipped=sum(1 for row in rows if row.path == PathKind.SKIPPED.value),
        max_ratio=max(ratios) if ratios else None,
    )
    if config.check == CheckName.THM_WN:
        epsilon = _as_fraction(config.epsilon)
        for n, p, m in product(config.n, config.p, config.m):
            summary.thresholds[f"n={n},p={p},m={m}"] = nontriviality_threshold(n, p, m, epsilon)
    return summary


def _format_float(value: float | None) -> str:
    return "" if value is None else f"{value:.12g}"


def write_csv(rows: Sequence[BoundReportRow], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(
                [
                    row.p,
                    row.m,
                    row.n,
                    "+".join(str(value) for value in row.a),
                    _format_float(row.magnitude),
                    _format_float(row.bound),
                    _format_float(row.ratio),
                    row.cell_size,
                    row.path,
                    row.elapsed_ms,
                ]
            )
    return path


def write_json(payload: dict, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def report_paths(check: CheckName, out: str | Path | None, settings: Settings) -> tuple[Path, Path]:
    base = Path(out).with_suffix("") if out else settings.report_path() / check.value
    return base.with_suffix(".json"), base.with_suffix(".csv")


def run_sweep(
    config: SweepConfig,
    settings: Settings | None = None,
    out: str | Path | None = None,
) -> SweepSummary:
    settings = settings or get_settings()
    started = time.perf_counter()
    with log_scope(f"sweep-{config.check.value}"):
        log_key_event("INFO", "扫描 {} 开始", config.check.value)
        rows = evaluate_sweep(config, settings)
    summary = summarize(config, rows)
    json_path, csv_path = report_paths(config.check, out, settings)
    summary.json_path = str(json_path)
    summary.csv_path = str(csv_path)
    write_json(
        {
            "check": config.check.value,
            "config": config.model_dump(mode="json"),
            "summary": summary.model_dump(mode="json"),
            "rows": [row.model_dump(mode="json") for row in rows],
        },
        json_path,
    )
    write_csv(rows, csv_path)
    log_key_event(
        "INFO",
        "扫描 {} 完成: {} 点，通过 {}，失败 {}，跳过 {}，最大比值 {}，耗时 {:.1f} s",
        config.check.value,
        summary.total,
        summary.passed,
        summary.failed,
        summary.skipped,
        summary.max_ratio,
        time.perf_counter() - started,
    )
    log_key_event("INFO", "报告已写入 {} 与 {}", json_path, csv_path)
    return summary
