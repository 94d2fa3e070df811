"""GL(4) 最长 Weyl 元胞腔的闭式参数化。

u′ = [[1, x, u, w], [0, 1, y, v], [0, 0, 1, z], [0, 0, 0, 1]]，c = diag(c_1, c_2, c_3, c_4)，
c_1 = p^{a1}v_1, c_2 = p^{a2-a1}v_2, c_3 = p^{a3-a2}v_3, c_4 = p^{-a3}v_4。
记 D = xyz - xv - uz + w，E = uv - wy，则 u·w c·u′ 的前三行右上角为零时

    u_1 = c_4(u - xy)/(c_3 D)    u_2 = c_3(w - uz)/(c_2 E)    u_3 = -c_2 v/(c_1 w)
    u_4 = c_4 x/(c_2 D)          u_5 = c_3(yz - v)/(c_1 E)    u_6 = -c_4/(c_1 D)

其中 u_1, u_2, u_3 在超对角线上，u_4 = (1,3)，u_5 = (2,4)，u_6 = (1,4)。
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction

from loguru import logger
from sympy import multiplicity

from app.core.config import Settings, get_settings
from app.core.errors import ConfigError, DegenerateDenominator, Infeasible
from app.core.logging_config import log_key_event
from app.core.scheduler import ENUMERATION_WORKERS, resolve_workers, run_partitioned
from app.services.group_geometry import PMatrix, UpperUnipotent, WeylPerm, longest_times_torus
from app.services.kloosterman import CellSpec, character_exponent
from app.services.padic_core import CycloAccumulator, CycloSum, PadicScaled, PrimeContext

_VARIABLES = ("x", "y", "z", "u", "w", "v")
# u′ 中各变量的位置（0 起始）
_POSITIONS = {"x": (0, 1), "u": (0, 2), "w": (0, 3), "y": (1, 2), "v": (1, 3), "z": (2, 3)}


@dataclass(frozen=True)
class GL4Param:
    """x = p^{-a}x′, y = p^{-b}y′, z = p^{-c}z′, u = p^{-d}u′, w = p^{-e}w′, v = p^{-f}v′。

    赋值取 -m 表示该变量 ≡ 0 (mod p^m)；否则单位部分只在模 p^{m+赋值} 下有意义。
    """

    m: int
    a: int
    b: int
    c: int
    d: int
    e: int
    f: int
    unit_x: int
    unit_y: int
    unit_z: int
    unit_u: int
    unit_w: int
    unit_v: int

    def valuation_of(self, name: str) -> int:
        return {"x": self.a, "y": self.b, "z": self.c, "u": self.d, "w": self.e, "v": self.f}[name]

    def unit_of(self, name: str) -> int:
        return getattr(self, f"unit_{name}")

    @classmethod
    def from_numerators(cls, numerators: dict[str, int], p: int, ell: int, m: int) -> "GL4Param":
        """由网格分子 N = p^ℓ·(变量) ∈ [0, p^{ℓ+m}) 读出赋值与单位。"""

        values: dict[str, int] = {}
        for name in _VARIABLES:
            numerator = numerators[name]
            if numerator == 0:
                values[name], values[f"unit_{name}"] = -m, 0
                continue
            t = int(multiplicity(p, numerator))
            values[name] = ell - t
            values[f"unit_{name}"] = (numerator // p**t) % p ** (ell + m - t)
        return cls(
            m=m,
            a=values["x"],
            b=values["y"],
            c=values["z"],
            d=values["u"],
            e=values["w"],
            f=values["v"],
            unit_x=values["unit_x"],
            unit_y=values["unit_y"],
            unit_z=values["unit_z"],
            unit_u=values["unit_u"],
            unit_w=values["unit_w"],
            unit_v=values["unit_v"],
        )

    def value(self, name: str, p: int) -> Fraction:
        valuation = self.valuation_of(name)
        if valuation == -self.m:
            return Fraction(0)
        return Fraction(p) ** (-valuation) * self.unit_of(name)

    def uprime(self, ctx: PrimeContext) -> UpperUnipotent:
        return UpperUnipotent.from_fractions(
            ctx,
            4,
            {_POSITIONS[name]: self.value(name, ctx.p) for name in _VARIABLES},
        )


@dataclass(frozen=True)
class GL4Derived:
    mu: PadicScaled
    lam: PadicScaled
    m_tilde: PadicScaled
    n_tilde: PadicScaled
    t_tilde: PadicScaled
    k: PadicScaled
    D: PadicScaled
    E: PadicScaled


def _require_n4(spec: CellSpec) -> None:
    if spec.n != 4:
        raise ConfigError(f"GL(4) 闭式路径只支持 n=4，实际 n={spec.n}")


def _torus_entries(spec: CellSpec) -> list[PadicScaled]:
    torus = spec.torus
    return [torus.entry(i) for i in range(4)]


def _variables(param: GL4Param, ctx: PrimeContext) -> dict[str, PadicScaled]:
    return {name: ctx.scalar(param.value(name, ctx.p)) for name in _VARIABLES}


def derived_quantities(param: GL4Param, spec: CellSpec) -> GL4Derived:
    """μ = -D/c_4, λ = -E/(c_3c_4), m̃ = p^{a2}(xv - w), ñ = p^{a3}(yz - v), t̃ = p^{a2}(xy - u), k = c_1c_2y。"""

    _require_n4(spec)
    ctx = spec.ctx
    p = ctx.p
    _, a2, a3 = spec.a
    c1, c2, c3, c4 = _torus_entries(spec)
    var = _variables(param, ctx)
    x, y, z, u, w, v = (var[name] for name in _VARIABLES)
    D = x * y * z - x * v - u * z + w
    E = u * v - w * y
    return GL4Derived(
        mu=-D / c4,
        lam=-E / (c3 * c4),
        m_tilde=ctx.scalar(p**a2) * (x * v - w),
        n_tilde=ctx.scalar(p**a3) * (y * z - v),
        t_tilde=ctx.scalar(p**a2) * (x * y - u),
        k=c1 * c2 * y,
        D=D,
        E=E,
    )


def properties_filter(param: GL4Param, spec: CellSpec) -> bool:
    """性质 (1)–(10) 全部成立时为真。"""

    _require_n4(spec)
    m = spec.m
    a1, a2, a3 = spec.a
    if min(spec.a) < m:
        return False
    # (3)(4)(5)(8)(10)：赋值条件
    if param.e != a1:
        return False
    if param.a + m > a1 or param.d + m > a1:
        return False
    if param.f + m > a2 or param.b + m > a2:
        return False
    if param.c + m > a3:
        return False
    ctx = spec.ctx
    c1 = _torus_entries(spec)[0]
    w = ctx.scalar(param.value("w", ctx.p))
    if not (c1 * w).congruent_one(m):
        return False
    derived = derived_quantities(param, spec)
    if derived.D.is_exact_zero or derived.E.is_exact_zero:
        return False
    return (
        derived.mu.congruent_one(m)
        and derived.lam.congruent_one(m)
        and derived.m_tilde.in_ideal(m)
        and derived.n_tilde.in_ideal(m)
        and derived.t_tilde.in_ideal(m)
    )


def left_unipotent_closed_form(param: GL4Param, spec: CellSpec) -> UpperUnipotent:
    _require_n4(spec)
    ctx = spec.ctx
    c1, c2, c3, c4 = _torus_entries(spec)
    var = _variables(param, ctx)
    x, y, z, u, w, v = (var[name] for name in _VARIABLES)
    D = x * y * z - x * v - u * z + w
    E = u * v - w * y
    for label, denominator in (("D", D), ("E", E), ("w", w)):
        if denominator.is_exact_zero or denominator.is_zero_at_precision():
            raise DegenerateDenominator(f"闭式公式的分母 {label} 为零")
    entries = {
        (0, 1): c4 * (u - x * y) / (c3 * D),
        (1, 2): c3 * (w - u * z) / (c2 * E),
        (2, 3): -(c2 * v) / (c1 * w),
        (0, 2): c4 * x / (c2 * D),
        (1, 3): c3 * (y * z - v) / (c1 * E),
        (0, 3): -c4 / (c1 * D),
    }
    return UpperUnipotent(ctx, 4, entries)


def closed_form_cell_matrix(param: GL4Param, spec: CellSpec) -> PMatrix:
    """等式左边 g_0 = u·w c·u′ 的显式形式（前三行右上角为零）。"""

    _require_n4(spec)
    ctx = spec.ctx
    c1, c2, c3, c4 = _torus_entries(spec)
    var = _variables(param, ctx)
    x, y, z, u, w, v = (var[name] for name in _VARIABLES)
    D = x * y * z - x * v - u * z + w
    E = u * v - w * y
    zero = ctx.zero()
    rows = (
        (-c4 / D, zero, zero, zero),
        (c3 * (y * z - v) / E, c3 * D / E, zero, zero),
        (-(c2 * v) / w, c2 * (w - x * v) / w, c2 * (w * y - u * v) / w, zero),
        (c1, c1 * x, c1 * u, c1 * w),
    )
    return PMatrix(ctx, rows)


def verify_identity_gl4(param: GL4Param, spec: CellSpec) -> bool:
    """比较 g_0 与 u·w·c·u′ 四个矩阵的乘积。"""

    u = left_unipotent_closed_form(param, spec)
    lhs = closed_form_cell_matrix(param, spec)
    rhs = u.to_matrix() @ longest_times_torus(WeylPerm.longest(4), spec.torus) @ param.uprime(spec.ctx).to_matrix()
    return lhs == rhs


class GL4FastEnumerator:
    """按 X, U, Y, V, Z 的分子枚举，W 由性质 (1) 与 (3) 联立解出。"""

    def __init__(self, spec: CellSpec, settings: Settings | None = None) -> None:
        _require_n4(spec)
        self.spec = spec
        self.settings = settings or get_settings()
        p, ell, m = spec.ctx.p, spec.ell, spec.m
        a1, a2, a3 = spec.a
        self.p, self.ell, self.m = p, ell, m
        self.top = p**ell
        self.grid = p ** (ell + m)
        self.x_values = list(range(0, self.grid, p ** (ell - a1 + m)))
        self.y_values = list(range(0, self.grid, p ** (ell - a2 + m)))
        self.z_values = list(range(0, self.grid, p ** (ell - a3 + m)))
        self.w_modulus = p ** (ell - a1 + m)
        self.w_residue = pow(spec.v[0], -1, self.w_modulus) * p ** (ell - a1) % self.w_modulus
        self.mod_second = p ** (2 * ell - a2 + m)
        self.mod_third = p ** (2 * ell - a3 + m)
        self.mod_det = p ** (3 * ell - a3 + m)
        self.det_target = -spec.v[3] * p ** (3 * ell - a3)
        self.lam_target = spec.v[2] * spec.v[3] * p ** (2 * ell - a2)

    def admissible(self) -> bool:
        spec = self.spec
        return min(spec.a) >= spec.m and spec.feasible

    def grid_size(self) -> int:
        return len(self.x_values) ** 2 * len(self.y_values) ** 2 * len(self.z_values)

    def _w_values(self, X: int, U: int, Y: int, V: int, Z: int) -> list[int]:
        P = self.top
        square = P * P
        # (1): P²W ≡ remainder (mod p^{3ℓ-a3+m})，有解当且仅当 p^{2ℓ} | remainder
        remainder = (self.det_target - X * Y * Z + P * X * V + P * U * Z) % self.mod_det
        if remainder % square:
            return []
        det_modulus = self.mod_det // square
        det_residue = remainder // square
        if det_modulus >= self.w_modulus:
            if det_residue % self.w_modulus != self.w_residue:
                return []
            residue, modulus = det_residue, det_modulus
        else:
            if self.w_residue % det_modulus != det_residue:
                return []
            residue, modulus = self.w_residue, self.w_modulus
        return list(range(residue, self.grid, modulus))

    def _search(self, X: int) -> list[dict[str, int]]:
        P = self.top
        found = []
        for U in self.x_values:
            for Y in self.y_values:
                # (9) t̃
                if (X * Y - P * U) % self.mod_second:
                    continue
                for V in self.y_values:
                    for Z in self.z_values:
                        # (7) ñ
                        if (Y * Z - P * V) % self.mod_third:
                            continue
                        for W in self._w_values(X, U, Y, V, Z):
                            # (6) m̃ 与 (2) λ
                            if (X * V - P * W) % self.mod_second:
                                continue
                            if (W * Y - U * V - self.lam_target) % self.mod_second:
                                continue
                            found.append({"x": X, "y": Y, "z": Z, "u": U, "w": W, "v": V})
        return found

    def accepted_params(self) -> list[GL4Param]:
        if not self.admissible():
            return []
        size = self.grid_size()
        if size > self.settings.enumeration_budget:
            log_key_event("WARNING", "GL(4) 闭式路径候选数 {} 超过枚举预算", size)
            raise Infeasible(f"候选数 {size} 超过枚举预算 {self.settings.enumeration_budget}")
        workers = resolve_workers(self.settings.enumeration_workers, ENUMERATION_WORKERS)
        chunks = run_partitioned(self._search, self.x_values, workers, "gl4-fast")
        params = []
        for numerators in (item for chunk in chunks for item in chunk):
            param = GL4Param.from_numerators(numerators, self.p, self.ell, self.m)
            if not properties_filter(param, self.spec):
                logger.warning("整数同余通过但性质 (1)–(10) 不成立: {}", numerators)
                continue
            params.append(param)
        return params


def accepted_params(spec: CellSpec, settings: Settings | None = None) -> list[GL4Param]:
    return GL4FastEnumerator(spec, settings).accepted_params()


def kloosterman_gl4_fast(spec: CellSpec, settings: Settings | None = None) -> CycloSum:
    """Σ_{接受的参数} ξ(Σ ν_i u_i)·ξ(ν′_1 x + ν′_2 y + ν′_3 z)。"""

    started = time.perf_counter()
    settings = settings or get_settings()
    params = accepted_params(spec, settings)
    ctx = spec.ctx
    acc = CycloAccumulator(ctx.p, ctx.L, settings=settings)
    for param in params:
        u = left_unipotent_closed_form(param, spec)
        uprime = param.uprime(ctx)
        acc.add(character_exponent(spec, u.superdiagonal(), uprime.superdiagonal()))
    logger.debug(
        "GL(4) 闭式路径 a={}: {} 个参数，耗时 {:.1f} ms",
        spec.a,
        len(params),
        (time.perf_counter() - started) * 1000,
    )
    return acc.freeze()
