"""GL(n) 局部 Kloosterman 和：胞腔 X(w c) 的剪枝枚举、精确求值、S_2、环面轨道分解与 Stevens 恒等式。

u′ 的每个元素写成 x_{ij} = P_{ij} / p^ℓ，P_{ij} ∈ [0, p^{ℓ+m})。对 w c·u′ 的末 k 行子式，
记 D_J = det(P[0..k-1][J])，ε_k = (-1)^{k(k-1)/2}，V_k = v_1⋯v_k，判据化为整数同余：

    J 非尾部:  D_J ≡ 0                  (mod p^{kℓ-a_k+m})
    J 为尾部:  ε_k·V_k·D_J ≡ p^{kℓ-a_k}  (mod p^{kℓ-a_k+m})

其中 a_n = 0。k = 1 时判据直接给出每个元素的取值范围。
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Iterator, Mapping, Sequence

from loguru import logger
from sympy import primitive_root, totient

from app.core.config import Settings, get_settings
from app.core.errors import (
    ConfigError,
    FactorizationMismatch,
    Infeasible,
    NotInBigCell,
    OrbitInconsistency,
)
from app.core.logging_config import log_key_event
from app.core.scheduler import ENUMERATION_WORKERS, resolve_workers, run_partitioned
from app.services.group_geometry import (
    PMatrix,
    TorusDiag,
    UpperUnipotent,
    WeylPerm,
    bruhat_extract,
    in_Km,
    int_det,
    longest_times_torus,
    ul_decompose,
)
from app.services.padic_core import (
    CycloAccumulator,
    CycloSum,
    PadicScaled,
    PrimeContext,
    fraction_residue,
    fraction_valuation,
    xi_of,
)


def longest_sign(n: int) -> int:
    """ε_n = (-1)^{n(n-1)/2} = det(w_{G_n})。"""

    return -1 if (n * (n - 1) // 2) % 2 else 1


def default_units(n: int) -> tuple[int, ...]:
    return (1,) * (n - 1) + (longest_sign(n),)


@dataclass(frozen=True)
class CellSpec:
    ctx: PrimeContext
    n: int
    m: int
    a: tuple[int, ...]
    v: tuple[int, ...]
    nu: tuple[Fraction, ...]
    nu_prime: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        p = self.ctx.p
        if self.n < 1:
            raise ConfigError("n 必须 >= 1")
        if self.m < 1:
            raise ConfigError("层级 m 必须 >= 1")
        if len(self.a) != self.n - 1:
            raise ConfigError(f"需要 {self.n - 1} 个指数 a_i，实际 {len(self.a)}")
        if any(value < 0 for value in self.a):
            raise ConfigError(f"指数 a_i 不能为负: {self.a}")
        if len(self.v) != self.n:
            raise ConfigError(f"需要 {self.n} 个环面单位 v_i，实际 {len(self.v)}")
        if any(unit % p == 0 for unit in self.v):
            raise ConfigError(f"环面单位必须与 p={p} 互素: {self.v}")
        for name, values in (("ν", self.nu), ("ν′", self.nu_prime)):
            if len(values) != self.n - 1:
                raise ConfigError(f"{name} 需要 {self.n - 1} 个分量")
            for value in values:
                valuation = fraction_valuation(value, p)
                if not -self.m <= valuation <= self.m:
                    raise ConfigError(f"{name} 分量 {value} 的赋值不在 [-m, m] 内")
        self.ctx.check_cell(self.n, self.ell, self.m)
        if self.ctx.L < self.ell + 2 * self.m:
            raise ConfigError(f"分圆阶指数 L={self.ctx.L} 小于 ℓ+2m={self.ell + 2 * self.m}")

    @classmethod
    def build(
        cls,
        p: int,
        n: int,
        m: int,
        a: Sequence[int],
        v: Sequence[int] | None = None,
        nu: Sequence[Fraction | int] | None = None,
        nu_prime: Sequence[Fraction | int] | None = None,
        settings: Settings | None = None,
    ) -> "CellSpec":
        ell = max(a, default=0)
        ctx = PrimeContext.for_cell(p, n, ell, m, settings)
        ones = (Fraction(1),) * (n - 1)
        return cls(
            ctx=ctx,
            n=n,
            m=m,
            a=tuple(a),
            v=tuple(v) if v is not None else default_units(n),
            nu=tuple(Fraction(value) for value in nu) if nu is not None else ones,
            nu_prime=tuple(Fraction(value) for value in nu_prime) if nu_prime is not None else ones,
        )

    @property
    def ell(self) -> int:
        return max(self.a, default=0)

    @property
    def torus(self) -> TorusDiag:
        return TorusDiag.ladder(self.ctx, self.a, self.v)

    @property
    def feasible(self) -> bool:
        """det(w c) = ε_n·v_1⋯v_n ∈ 1 + p^m ℤ_p。"""

        det = longest_sign(self.n)
        for unit in self.v:
            det *= unit
        return (det - 1) % self.ctx.p**self.m == 0

    def involuted(self) -> "CellSpec":
        """ι 作用后的参数：a 反转，v_i ↦ v_{n+1-i}^{-1}，ν 与 ν′ 反转。"""

        modulus = self.ctx.p**self.ctx.W
        return CellSpec(
            ctx=self.ctx,
            n=self.n,
            m=self.m,
            a=tuple(reversed(self.a)),
            v=tuple(pow(unit, -1, modulus) for unit in reversed(self.v)),
            nu=tuple(reversed(self.nu)),
            nu_prime=tuple(reversed(self.nu_prime)),
        )

    def negated(self) -> "CellSpec":
        return CellSpec(
            ctx=self.ctx,
            n=self.n,
            m=self.m,
            a=self.a,
            v=self.v,
            nu=tuple(-value for value in self.nu),
            nu_prime=tuple(-value for value in self.nu_prime),
        )

    def to_params(self) -> dict:
        return {
            "p": self.ctx.p,
            "m": self.m,
            "n": self.n,
            "a": list(self.a),
            "units": list(self.v),
            "nu": [str(value) for value in self.nu],
            "nu_prime": [str(value) for value in self.nu_prime],
        }


@dataclass(frozen=True)
class CellElement:
    """X(w c) 的一个代表元 g = u·w c·u′；key 为 u′ 的行优先分子向量。"""

    u: UpperUnipotent
    uprime: UpperUnipotent
    key: tuple[int, ...]
    g: PMatrix = field(repr=False, compare=False)


@dataclass
class OrbitDecomposition:
    representatives: list[CellElement] = field(default_factory=list)
    orbit_sizes: list[int] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(self.orbit_sizes)


# ---------------------------------------------------------------------------
# 枚举
# ---------------------------------------------------------------------------


def upper_positions(n: int) -> list[tuple[int, int]]:
    """严格上三角位置的行优先顺序，与 CellElement.key 对齐。"""

    return [(i, j) for i in range(n) for j in range(i + 1, n)]


@dataclass(frozen=True)
class _MinorCheck:
    k: int
    cols: tuple[int, ...]
    coef: int
    target: int
    modulus: int

    def holds(self, numerators: list[list[int]]) -> bool:
        minor = int_det([[numerators[r][c] for c in self.cols] for r in range(self.k)])
        return (self.coef * minor - self.target) % self.modulus == 0


class CellEnumerator:
    """按列从右到左、列内自下而上填入 u′ 的分子，子式的支撑一旦确定立即检验。"""

    def __init__(self, spec: CellSpec, settings: Settings | None = None) -> None:
        self.spec = spec
        self.settings = settings or get_settings()
        self.p = spec.ctx.p
        self.n = spec.n
        self.top = self.p**spec.ell
        self.grid_modulus = self.p ** (spec.ell + spec.m)
        self.positions = [(r, c) for c in range(self.n - 1, 0, -1) for r in range(c - 1, -1, -1)]
        self.choices = [self._entry_choices(r, c) for r, c in self.positions]
        self.constant_checks, self.checks_at = self._attach_checks()

    def _a(self, k: int) -> int:
        return 0 if k == self.n else self.spec.a[k - 1]

    def _entry_choices(self, r: int, c: int) -> list[int]:
        spec = self.spec
        a_k = self._a(r + 1)
        step = self.p ** (spec.ell - a_k + spec.m)
        if r == 0 and c == self.n - 1:
            base = pow(spec.v[0], -1, step) * self.p ** (spec.ell - a_k) % step
            return list(range(base, self.grid_modulus, step))
        return list(range(0, self.grid_modulus, step))

    def _attach_checks(self) -> tuple[list[_MinorCheck], list[list[_MinorCheck]]]:
        spec = self.spec
        order = {position: index for index, position in enumerate(self.positions)}
        constant: list[_MinorCheck] = []
        attached: list[list[_MinorCheck]] = [[] for _ in self.positions]
        v_partial = 1
        for k in range(1, self.n + 1):
            v_partial *= spec.v[k - 1]
            shift = k * spec.ell - self._a(k)
            modulus = self.p ** (shift + spec.m)
            tail = tuple(range(self.n - k, self.n))
            for cols in combinations(range(self.n), k):
                if cols == tail:
                    check = _MinorCheck(k, cols, longest_sign(k) * v_partial, self.p**shift, modulus)
                else:
                    check = _MinorCheck(k, cols, 1, 0, modulus)
                support = [order[(r, c)] for r in range(k) for c in cols if r < c]
                if support:
                    attached[max(support)].append(check)
                else:
                    constant.append(check)
        return constant, attached

    def base_numerators(self) -> list[list[int]]:
        return [[self.top if i == j else 0 for j in range(self.n)] for i in range(self.n)]

    def grid_size(self) -> int:
        size = 1
        for values in self.choices:
            size *= len(values)
        return size

    def _search(self, first_value: int | None) -> list[tuple[int, ...]]:
        numerators = self.base_numerators()
        found: list[tuple[int, ...]] = []
        last = len(self.positions)

        def descend(index: int) -> None:
            if index == last:
                found.append(tuple(numerators[i][j] for i, j in upper_positions(self.n)))
                return
            r, c = self.positions[index]
            candidates = [first_value] if index == 0 else self.choices[index]
            for value in candidates:
                numerators[r][c] = value
                if all(check.holds(numerators) for check in self.checks_at[index]):
                    descend(index + 1)
            numerators[r][c] = 0

        descend(0)
        return found

    def candidate_keys(self) -> list[tuple[int, ...]]:
        spec = self.spec
        if not spec.feasible:
            logger.debug("det(w c) ∉ 1+p^m ℤ_p，胞腔为空: {}", spec.to_params())
            return []
        base = self.base_numerators()
        if not all(check.holds(base) for check in self.constant_checks):
            logger.debug("常数子式不满足同余（某个 a_k < m），胞腔为空: {}", spec.to_params())
            return []
        size = self.grid_size()
        if size > self.settings.enumeration_budget:
            log_key_event("WARNING", "候选数 {} 超过枚举预算 {}", size, self.settings.enumeration_budget)
            raise Infeasible(f"候选数 {size} 超过枚举预算 {self.settings.enumeration_budget}")
        if not self.positions:
            return [()]
        workers = resolve_workers(self.settings.enumeration_workers, ENUMERATION_WORKERS)
        chunks = run_partitioned(self._search, self.choices[0], workers, "cell-enum")
        return sorted(key for chunk in chunks for key in chunk)


def _element_from_key(spec: CellSpec, key: tuple[int, ...], wc: PMatrix) -> CellElement | None:
    ctx = spec.ctx
    top = ctx.p**spec.ell
    uprime = UpperUnipotent.from_fractions(
        ctx,
        spec.n,
        {position: Fraction(value, top) for position, value in zip(upper_positions(spec.n), key) if value},
    )
    n_h, g = ul_decompose(wc @ uprime.to_matrix())
    u = n_h.inverse()
    if not in_Km(g, spec.m):
        logger.warning("候选 {} 通过了子式判据却不在 K_m 中，已跳过", key)
        return None
    try:
        u_check, uprime_check = bruhat_extract(g, WeylPerm.longest(spec.n), spec.torus)
    except NotInBigCell:
        logger.warning("候选 {} 的 Bruhat 分解失败，已跳过", key)
        return None
    if u_check.to_matrix() != u.to_matrix() or uprime_check.to_matrix() != uprime.to_matrix():
        logger.warning("候选 {} 的 Bruhat 往返不一致，已跳过", key)
        return None
    return CellElement(u=u, uprime=uprime, key=key, g=g)


def enumerate_cell(spec: CellSpec, settings: Settings | None = None) -> list[CellElement]:
    """X(w_{G_n} c) 的全部代表元，按 key 排序。"""

    started = time.perf_counter()
    enumerator = CellEnumerator(spec, settings)
    keys = enumerator.candidate_keys()
    wc = longest_times_torus(WeylPerm.longest(spec.n), spec.torus)
    elements = [element for key in keys if (element := _element_from_key(spec, key, wc)) is not None]
    logger.debug(
        "胞腔枚举 p={} n={} a={}: 网格 {}，接受 {}，耗时 {:.1f} ms",
        spec.ctx.p,
        spec.n,
        spec.a,
        enumerator.grid_size(),
        len(elements),
        (time.perf_counter() - started) * 1000,
    )
    return elements


# ---------------------------------------------------------------------------
# 求值
# ---------------------------------------------------------------------------


def character_exponent(
    spec: CellSpec,
    u_superdiag: Sequence[PadicScaled],
    uprime_superdiag: Sequence[PadicScaled],
) -> int:
    """ψ(u)·ψ(u′) = ζ_{p^L}^k 中的 k，ψ(u) = ξ(Σ ν_i u_i)。"""

    ctx = spec.ctx
    left = ctx.zero()
    for nu, value in zip(spec.nu, u_superdiag):
        left = left + ctx.scalar(nu) * value
    right = ctx.zero()
    for nu, value in zip(spec.nu_prime, uprime_superdiag):
        right = right + ctx.scalar(nu) * value
    return (xi_of(left, ctx) + xi_of(right, ctx)) % ctx.p**ctx.L


def kloosterman_sum(
    spec: CellSpec,
    settings: Settings | None = None,
    elements: Sequence[CellElement] | None = None,
) -> CycloSum:
    """Kl_p(ψ; c, w_{G_n}) = Σ_{x ∈ X} ψ(u(x))·ψ(u′(x))。"""

    settings = settings or get_settings()
    if elements is None:
        elements = enumerate_cell(spec, settings)
    acc = CycloAccumulator(spec.ctx.p, spec.ctx.L, settings=settings)
    for element in elements:
        acc.add(character_exponent(spec, element.u.superdiagonal(), element.uprime.superdiagonal()))
    return acc.freeze()


# ---------------------------------------------------------------------------
# GL(2) 受限 Kloosterman 和
# ---------------------------------------------------------------------------


def restricted_lambdas(p: int, ell: int, m: int) -> list[int]:
    """模 p^{ℓ+m} 且 ≡ 1 (mod p^m) 的 λ，共 p^ℓ 个。"""

    return [1 + p**m * k for k in range(p**ell)]


def s2_from_numerators(a: int, a_prime: int, p: int, ell: int, m: int, order_exp: int) -> CycloSum:
    """Σ_λ ζ_{p^{ℓ+m}}^{aλ + a′λ^{-1}}，λ 取遍 restricted_lambdas，结果嵌入到阶 p^{order_exp}。"""

    level = ell + m
    modulus = p**level
    factor = p ** (order_exp - level)
    terms: dict[int, int] = {}
    for lam in restricted_lambdas(p, ell, m):
        exponent = (a * lam + a_prime * pow(lam, -1, modulus)) % modulus * factor
        terms[exponent] = terms.get(exponent, 0) + 1
    return CycloSum.from_terms(p, order_exp, terms.items())


def s2_restricted(nu: Fraction | int, nu_prime: Fraction | int, ell: int, m: int, ctx: PrimeContext) -> CycloSum:
    """S_2(ν, ν′; p^ℓ) = Σ_{λλ′=1, λ≡1 (p^m)} ξ((νλ + ν′λ′)/p^ℓ)。"""

    if ell < 0:
        raise ConfigError("ℓ 不能为负")
    p = ctx.p
    level = ell + m
    a = fraction_residue(Fraction(nu) * p**m, p, level)
    a_prime = fraction_residue(Fraction(nu_prime) * p**m, p, level)
    return s2_from_numerators(a, a_prime, p, ell, m, max(ctx.L, level))


def unit_group_structure(p: int, m: int) -> tuple[list[tuple[int, int]], dict[int, tuple[int, ...]]]:
    """(ℤ/p^m)^× 的循环因子 [(生成元, 阶)] 与离散对数表。"""

    modulus = p**m
    if p == 2:
        if m == 1:
            factors: list[tuple[int, int]] = []
        elif m == 2:
            factors = [(modulus - 1, 2)]
        else:
            factors = [(modulus - 1, 2), (5, 2 ** (m - 2))]
    else:
        factors = [(int(primitive_root(modulus)), int(totient(modulus)))]
    dlog: dict[int, tuple[int, ...]] = {}
    for exponents in product(*(range(order) for _, order in factors)):
        value = 1
        for (generator, _), exponent in zip(factors, exponents):
            value = value * pow(generator, exponent, modulus) % modulus
        dlog[value % modulus] = exponents
    return factors, dlog


def s2_twisted_decomposition(
    nu: Fraction | int,
    nu_prime: Fraction | int,
    ell: int,
    m: int,
    ctx: PrimeContext,
) -> CycloSum:
    """φ(p^m)^{-1}·Σ_{χ mod p^m} Σ_{λλ′=1} ξ((νλ+ν′λ′)/p^ℓ)·χ(λ)，按乘法特征正交性应等于 S_2。"""

    p = ctx.p
    level = ell + m
    modulus = p**level
    tame = 1 if p == 2 else p - 1
    order = tame * modulus
    a = fraction_residue(Fraction(nu) * p**m, p, level)
    a_prime = fraction_residue(Fraction(nu_prime) * p**m, p, level)
    factors, dlog = unit_group_structure(p, m)
    group_order = int(totient(p**m))
    character_grid = list(product(*(range(order_f) for _, order_f in factors)))
    strides = [order // order_f for _, order_f in factors]

    acc = CycloAccumulator(p, level, tame=tame)
    for lam in range(1, modulus):
        if lam % p == 0:
            continue
        base = (a * lam + a_prime * pow(lam, -1, modulus)) % modulus * tame
        logs = dlog[lam % p**m]
        for character in character_grid:
            twist = sum(r * e * stride for r, e, stride in zip(character, logs, strides))
            acc.add((base + twist) % order)
    value = acc.freeze().exact_divide(group_order)
    logger.debug("S_2 特征展开: p={} m={} ℓ={}，{} 个特征", p, m, ell, len(character_grid))
    return value.embed(max(ctx.L, level))


# ---------------------------------------------------------------------------
# 环面轨道与 Stevens 恒等式
# ---------------------------------------------------------------------------


def canonical_uprime(
    entries: Mapping[tuple[int, int], Fraction],
    n: int,
    p: int,
    ell: int,
    m: int,
) -> tuple[int, ...]:
    """u′·N(p^m ℤ_p) 的网格代表元：逐列自下而上，用 p^m 倍的列变换把 p^ℓ x_{ij} 约化到 [0, p^{ℓ+m})。"""

    top = p**ell
    modulus = p ** (ell + m)
    matrix = [[Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]
    for (i, j), value in entries.items():
        matrix[i][j] = Fraction(value)
    for j in range(1, n):
        for i in range(j - 1, -1, -1):
            scaled = matrix[i][j] * top
            if scaled.denominator % p == 0:
                raise ConfigError(f"u′ 的元素 ({i}, {j}) 分母超过 p^{ell}")
            target = scaled.numerator * pow(scaled.denominator, -1, modulus) % modulus
            shift = (target - scaled) / top
            if shift:
                for r in range(i + 1):
                    matrix[r][j] += shift * matrix[r][i]
    return tuple(int(matrix[i][j] * top) for i, j in upper_positions(n))


def torus_slot_generators(p: int, m: int) -> list[int]:
    """1 + p^m ℤ_p 的拓扑生成元。"""

    if p == 2 and m == 1:
        return [-1, 5]
    return [1 + p**m]


def _act_on_key(key: tuple[int, ...], spec: CellSpec, slot: int, generator: int) -> tuple[int, ...]:
    n, p, ell = spec.n, spec.ctx.p, spec.ell
    top = p**ell
    entries: dict[tuple[int, int], Fraction] = {}
    for (i, j), value in zip(upper_positions(n), key):
        if not value:
            continue
        factor = Fraction(1)
        if n - 1 - i == slot:
            factor *= generator
        if n - 1 - j == slot:
            factor /= generator
        entries[(i, j)] = Fraction(value, top) * factor
    return canonical_uprime(entries, n, p, ell, spec.m)


def orbit_decompose(
    spec: CellSpec,
    settings: Settings | None = None,
    elements: Sequence[CellElement] | None = None,
) -> OrbitDecomposition:
    """T(1+p^m ℤ_p) 在 X(w c) 上的轨道；代表元取 key 字典序最小者。"""

    if elements is None:
        elements = enumerate_cell(spec, settings)
    by_key = {element.key: element for element in elements}
    generators = torus_slot_generators(spec.ctx.p, spec.m)
    visited: set[tuple[int, ...]] = set()
    decomposition = OrbitDecomposition()
    for key in sorted(by_key):
        if key in visited:
            continue
        orbit = {key}
        frontier = [key]
        while frontier:
            current = frontier.pop()
            for slot in range(spec.n):
                for generator in generators:
                    image = _act_on_key(current, spec, slot, generator)
                    if image not in by_key:
                        raise OrbitInconsistency(f"环面作用把 {current} 送出了胞腔: {image}")
                    if image in visited:
                        raise OrbitInconsistency(f"轨道相交于 {image}")
                    if image not in orbit:
                        orbit.add(image)
                        frontier.append(image)
        visited |= orbit
        decomposition.representatives.append(by_key[min(orbit)])
        decomposition.orbit_sizes.append(len(orbit))
    logger.debug("轨道分解: {} 个元素，{} 条轨道", len(by_key), len(decomposition.orbit_sizes))
    return decomposition


def v_w_count(ell: int, m: int, n: int, p: int) -> tuple[int, Iterator[tuple[int, ...]]]:
    """|V_w(ℓ)| = p^{(n-1)ℓ} 以及惰性生成的 (λ_1, …, λ_{n-1})。λ′_i = λ_{n-i}^{-1} 由 λ 决定。"""

    if ell < 0:
        raise ConfigError("ℓ 不能为负")
    lambdas = restricted_lambdas(p, ell, m)
    return p ** ((n - 1) * ell), product(lambdas, repeat=n - 1)


def _theta_numerators(
    x: CellElement,
    spec: CellSpec,
    ell: int,
) -> tuple[list[int], list[int]]:
    ctx = spec.ctx
    level = ell + spec.m
    scale = ctx.scalar(ctx.p**level)
    numerators = [
        (scale * ctx.scalar(nu) * kappa).residue(level) for nu, kappa in zip(spec.nu, x.u.superdiagonal())
    ]
    numerators_prime = [
        (scale * ctx.scalar(nu) * kappa).residue(level)
        for nu, kappa in zip(spec.nu_prime, x.uprime.superdiagonal())
    ]
    return numerators, numerators_prime


def s_w_theta(x: CellElement, spec: CellSpec, ell: int) -> CycloSum:
    """S_w(θ_x; ℓ)，同时按直接求和与 S_2 因子乘积计算并比对。"""

    if ell < spec.ell:
        raise ConfigError(f"ℓ={ell} 小于 max a_i={spec.ell}")
    p, m, n = spec.ctx.p, spec.m, spec.n
    level = ell + m
    modulus = p**level
    order_exp = max(spec.ctx.L, level)
    numerators, numerators_prime = _theta_numerators(x, spec, ell)

    _, points = v_w_count(ell, m, n, p)
    terms: dict[int, int] = {}
    for lambdas in points:
        exponent = 0
        for i in range(n - 1):
            exponent += lambdas[i] * numerators[i]
            exponent += pow(lambdas[n - 2 - i], -1, modulus) * numerators_prime[i]
        key = exponent % modulus * p ** (order_exp - level)
        terms[key] = terms.get(key, 0) + 1
    direct = CycloSum.from_terms(p, order_exp, terms.items())

    factored = CycloSum.monomial(p, order_exp, 0)
    for i in range(n - 1):
        factored = factored * s2_from_numerators(
            numerators[i], numerators_prime[n - 2 - i], p, ell, m, order_exp
        )
    if direct != factored:
        log_key_event("ERROR", "S_w 直接求和与 S_2 乘积不一致: key={}", x.key)
        raise FactorizationMismatch(f"S_w 直接求和与 S_2 乘积不一致: {direct!r} vs {factored!r}")
    return direct


def stevens_identity_check(
    spec: CellSpec,
    settings: Settings | None = None,
    elements: Sequence[CellElement] | None = None,
) -> bool:
    """|V_w(ℓ)|·Kl = Σ_x N(x)·S_w(θ_x; ℓ)，两边都是精确分圆整数。"""

    if elements is None:
        elements = enumerate_cell(spec, settings)
    kl = kloosterman_sum(spec, settings, elements)
    decomposition = orbit_decompose(spec, settings, elements)
    ell = spec.ell
    size, _ = v_w_count(ell, spec.m, spec.n, spec.ctx.p)
    total = CycloSum.zero(spec.ctx.p, spec.ctx.L)
    for representative, orbit_size in zip(decomposition.representatives, decomposition.orbit_sizes):
        total = total + s_w_theta(representative, spec, ell) * orbit_size
    holds = total == kl * size
    if not holds:
        log_key_event("ERROR", "Stevens 恒等式不成立: {}", spec.to_params())
    return holds
