"""余特征组合、Dabrowski–Reeder 轨道积分公式及其暴力验证、相对 Shalika 芽的求值。"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

from loguru import logger

from app.core.config import Settings, get_settings
from app.core.errors import BlockMismatch, ConfigError, DetNotUnit, Infeasible
from app.core.logging_config import log_key_event
from app.core.scheduler import ENUMERATION_WORKERS, resolve_workers, run_partitioned
from app.services.group_geometry import (
    PMatrix,
    RelevantWeyl,
    TorusDiag,
    UpperUnipotent,
    WeylPerm,
    delta_big,
    longest_times_torus,
    nk_membership,
    principal_minor,
)
from app.services.kloosterman import CellElement, CellSpec, kloosterman_sum
from app.services.padic_core import CycloSum, PrimeContext, fraction_valuation


@dataclass(frozen=True)
class Cocharacter:
    values: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.values)

    def prefix_sums(self) -> list[int]:
        total, sums = 0, []
        for value in self.values:
            total += value
            sums.append(total)
        return sums


@dataclass(frozen=True)
class CorootDecomposition:
    """λ = Σ m_{ij}(e_i - e_j)，键为 1 起始的 (i, j)，只保存正的系数。"""

    n: int
    weights: dict[tuple[int, int], int] = field(hash=False)

    def as_cocharacter(self) -> Cocharacter:
        values = [0] * self.n
        for (i, j), weight in self.weights.items():
            values[i - 1] += weight
            values[j - 1] -= weight
        return Cocharacter(tuple(values))


@dataclass(frozen=True)
class GermValue:
    """K_e^{w}(c) = normalization × value，normalization = p^{-n(n-1)m/2}。"""

    value: CycloSum
    normalization: Fraction

    def magnitude(self) -> float:
        return float(self.normalization) * self.value.magnitude()

    def scaled_cyclo(self) -> CycloSum:
        """normalization·value 本身落在 ℤ[ζ] 中时返回它，否则抛 ValueError。"""

        if self.normalization.numerator != 1:
            return self.value * self.normalization.numerator
        return self.value.exact_divide(self.normalization.denominator)

    def to_payload(self) -> dict:
        return {
            "normalization": str(self.normalization),
            "value": self.value.to_payload(),
            "magnitude": self.magnitude(),
        }


def cocharacter_of_torus(a: TorusDiag) -> Cocharacter:
    return Cocharacter(tuple(a.exponents))


def torus_from_cocharacter(
    p: int,
    exponents: Sequence[int],
    units: Sequence[int] | None = None,
    settings: Settings | None = None,
) -> TorusDiag:
    """按余特征 λ 构造 diag(p^{λ_1}v_1, …)，精度按最大前缀和选取。"""

    peak = max([0, *Cocharacter(tuple(exponents)).prefix_sums()])
    ctx = PrimeContext.for_cell(p, len(exponents), peak, 1, settings)
    return TorusDiag(ctx, tuple(exponents), tuple(units) if units is not None else (1,) * len(exponents))


def _weak_compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """把 total 拆成 parts 个非负整数，字典序从大到小。"""

    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for rest in _weak_compositions(total - head, parts - 1):
            yield (head, *rest)


def enumerate_decompositions(lam: Cocharacter) -> list[CorootDecomposition]:
    """全部非负解。按节点 i 依次把流出量 λ_i + 流入量 分到 j > i 上，流出量为负即剪枝。"""

    n = lam.n
    if n == 0 or sum(lam.values) != 0 or any(s < 0 for s in lam.prefix_sums()):
        return []
    results: list[CorootDecomposition] = []
    weights: dict[tuple[int, int], int] = {}

    def visit(node: int, inflow: list[int]) -> None:
        if node == n - 1:
            if lam.values[node] + inflow[node] == 0:
                results.append(CorootDecomposition(n, {key: value for key, value in weights.items() if value}))
            return
        outflow = lam.values[node] + inflow[node]
        if outflow < 0:
            return
        targets = range(node + 1, n)
        for split in _weak_compositions(outflow, len(targets)):
            for target, amount in zip(targets, split):
                weights[(node + 1, target + 1)] = amount
                inflow[target] += amount
            visit(node + 1, inflow)
            for target, amount in zip(targets, split):
                inflow[target] -= amount
                weights.pop((node + 1, target + 1), None)

    visit(0, [0] * n)
    return results


def kappa(decomposition: CorootDecomposition) -> int:
    return sum(1 for weight in decomposition.weights.values() if weight > 0)


def decomposition_count_R(a: TorusDiag) -> int:
    return len(enumerate_decompositions(cocharacter_of_torus(a)))


def r_estimate(a: TorusDiag) -> int:
    """Π_{i<n} (S_i + 1)^{i(n-i)}，S_i 为 λ_a 的前缀和。"""

    n = a.n
    sums = cocharacter_of_torus(a).prefix_sums()
    estimate = 1
    for i in range(1, n):
        estimate *= (max(sums[i - 1], 0) + 1) ** (i * (n - i))
    return estimate


def orbital_integral_DR(a: TorusDiag, p: int | None = None) -> Fraction:
    """O_{f_0}(a) = Δ^{-1/2}(a)·Σ_m (1 - 1/p)^{κ(m)}。"""

    p = a.ctx.p if p is None else p
    decompositions = enumerate_decompositions(cocharacter_of_torus(a))
    if not decompositions:
        return Fraction(0)
    # Δ(a) = p^{-E}，E 为偶数，Δ^{-1/2} = p^{E/2}
    delta = delta_big(a.to_matrix())
    half = Fraction(p) ** (-(fraction_valuation(delta, p) // 2))
    factor = 1 - Fraction(1, p)
    return half * sum((factor ** kappa(d) for d in decompositions), Fraction(0))


class OrbitalBruteForce:
    """m = 0 时数 N(ℚ_p)/N(ℤ_p) 中满足 w c u′ ∈ N(ℚ_p)·GL_n(ℤ_p) 的 u′。"""

    def __init__(self, a: TorusDiag, settings: Settings | None = None) -> None:
        self.a = a
        self.settings = settings or get_settings()
        self.ctx = a.ctx
        self.n = a.n
        p = self.ctx.p
        sums = cocharacter_of_torus(a).prefix_sums()
        self.ell = max([0, *sums[:-1]])
        self.top = p**self.ell
        self.positions = [(r, c) for c in range(self.n - 1, 0, -1) for r in range(c - 1, -1, -1)]
        self.choices = []
        for r, _ in self.positions:
            if sums[r] < 0:
                self.choices.append([0])
            else:
                step = p ** max(0, self.ell - sums[r])
                self.choices.append(list(range(0, self.top, step)))
        self.wc = longest_times_torus(WeylPerm.longest(self.n), a)

    def grid_size(self) -> int:
        size = 1
        for values in self.choices:
            size *= len(values)
        return size

    def _accepts(self, assignment: Sequence[int]) -> bool:
        entries = {
            position: Fraction(value, self.top) for position, value in zip(self.positions, assignment) if value
        }
        uprime = UpperUnipotent.from_fractions(self.ctx, self.n, entries)
        return nk_membership(self.wc @ uprime.to_matrix(), 0)

    def _count_from(self, first_value: int) -> int:
        count = 0
        rest = self.choices[1:]

        def walk(prefix: list[int], depth: int) -> None:
            nonlocal count
            if depth == len(rest):
                count += self._accepts(prefix)
                return
            for value in rest[depth]:
                prefix.append(value)
                walk(prefix, depth + 1)
                prefix.pop()

        walk([first_value], 0)
        return count

    def count(self) -> int:
        size = self.grid_size()
        if size > self.settings.bruteforce_budget:
            log_key_event("WARNING", "暴力计数候选数 {} 超过预算 {}", size, self.settings.bruteforce_budget)
            raise Infeasible(f"候选数 {size} 超过暴力计数预算 {self.settings.bruteforce_budget}")
        if not self.positions:
            return int(self._accepts([]))
        workers = resolve_workers(self.settings.enumeration_workers, ENUMERATION_WORKERS)
        return sum(run_partitioned(self._count_from, self.choices[0], workers, "orbital-oracle"))


def orbital_bruteforce(a: TorusDiag, settings: Settings | None = None) -> int:
    started = time.perf_counter()
    counter = OrbitalBruteForce(a, settings)
    count = counter.count()
    logger.debug(
        "轨道积分暴力计数 λ={}: 网格 {}，计数 {}，耗时 {:.1f} ms",
        a.exponents,
        counter.grid_size(),
        count,
        (time.perf_counter() - started) * 1000,
    )
    return count


# ---------------------------------------------------------------------------
# 相对 Shalika 芽
# ---------------------------------------------------------------------------


def germ_longest(
    spec: CellSpec,
    settings: Settings | None = None,
    elements: Sequence[CellElement] | None = None,
) -> GermValue:
    """K_e^{w_{G_n}}(c) = p^{-n(n-1)m/2}·Kl_p(ψ^{-1}; c, w_{G_n})，ψ^{-1} 的和取 ψ 和的共轭。"""

    if not spec.feasible:
        logger.warning(
            "单位乘积不满足芽定义域的符号条件 (-1)^{(n+1)(n+2)/2+1}，胞腔为空: {}",
            spec.to_params(),
        )
    value = kloosterman_sum(spec, settings, elements).conj()
    normalization = Fraction(1, spec.ctx.p ** (spec.n * (spec.n - 1) * spec.m // 2))
    return GermValue(value=value, normalization=normalization)


def split_torus_blocks(
    w: RelevantWeyl,
    a: TorusDiag,
    m: int,
    settings: Settings | None = None,
) -> list[CellSpec]:
    """按相关 Weyl 元的分块把对角环面切成每块的阶梯形 CellSpec。"""

    if a.n != w.n:
        raise BlockMismatch(f"环面大小 {a.n} 与组成 {w.composition} 不匹配")
    blocks = []
    for start, size in w.blocks():
        exponents = a.exponents[start : start + size]
        if sum(exponents) != 0:
            raise DetNotUnit(f"第 {start + 1} 行开始的块行列式赋值为 {sum(exponents)}")
        ladder, partial = [], 0
        for exponent in exponents[:-1]:
            partial += exponent
            ladder.append(partial)
        blocks.append(
            CellSpec.build(a.ctx.p, size, m, ladder, v=a.units[start : start + size], settings=settings)
        )
    return blocks


def germ_relevant(
    w: RelevantWeyl,
    blocks: Sequence[CellSpec],
    settings: Settings | None = None,
) -> GermValue:
    """K_e^{w′}(a) = Π_i K_{e_i}^{w_i′}(a_i)；GL(1) 块是单位元处的 Dirac 函数。"""

    if len(blocks) != len(w.composition):
        raise BlockMismatch(f"组成 {w.composition} 需要 {len(w.composition)} 个块，实际 {len(blocks)}")
    for block, size in zip(blocks, w.composition):
        if block.n != size:
            raise BlockMismatch(f"块大小 {block.n} 与组成中的 {size} 不一致")
        if block.torus.det_valuation() != 0:
            raise DetNotUnit(f"块 {block.to_params()} 的行列式不是单位")
    if len({block.ctx.p for block in blocks}) > 1:
        raise BlockMismatch("各块的素数必须相同")
    value: CycloSum | None = None
    normalization = Fraction(1)
    for block in blocks:
        germ = germ_longest(block, settings)
        value = germ.value if value is None else value * germ.value
        normalization *= germ.normalization
    return GermValue(value=value, normalization=normalization)


def boundary_regime(g: PMatrix, threshold: int) -> RelevantWeyl:
    """|Δ_r(g)| 有界（赋值 <= threshold）的 r 处切开组成，其余 Δ_r 视为趋于 0。"""

    n = g.n
    cuts = []
    for r in range(1, n):
        minor = principal_minor(g, r)
        if not minor.is_exact_zero and minor.valuation() <= threshold:
            cuts.append(r)
    if principal_minor(g, n).is_exact_zero:
        raise ConfigError("g 不可逆")
    bounds = [0, *cuts, n]
    return RelevantWeyl(tuple(bounds[i + 1] - bounds[i] for i in range(len(bounds) - 1)))
