"""GL(n, ℚ_p) 上的矩阵工具：子式、Δ 与 δ、Weyl 元、Bruhat 分解、K_m 与 N(ℚ_p)K 陪集判定、对合 ι。

矩阵下标一律从 0 开始；文中的 1 起始下标只出现在日志和报告里。
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from loguru import logger

from app.core.errors import ConfigError, NotInBigCell, NotInvertible, PrecisionLoss
from app.services.padic_core import PadicScaled, PrimeContext


def int_det(rows: Sequence[Sequence[int]]) -> int:
    """整数矩阵行列式（Bareiss 无分数消元），供枚举内层循环使用。"""

    size = len(rows)
    if size == 0:
        return 1
    work = [list(row) for row in rows]
    sign = 1
    previous = 1
    for k in range(size - 1):
        if work[k][k] == 0:
            swap = next((i for i in range(k + 1, size) if work[i][k] != 0), None)
            if swap is None:
                return 0
            work[k], work[swap] = work[swap], work[k]
            sign = -sign
        pivot = work[k][k]
        for i in range(k + 1, size):
            for j in range(k + 1, size):
                work[i][j] = (work[i][j] * pivot - work[i][k] * work[k][j]) // previous
        previous = pivot
    return sign * work[size - 1][size - 1]


@dataclass(frozen=True)
class PMatrix:
    ctx: PrimeContext
    rows: tuple[tuple[PadicScaled, ...], ...]

    @property
    def n(self) -> int:
        return len(self.rows)

    @classmethod
    def from_fractions(cls, ctx: PrimeContext, rows: Iterable[Iterable[Fraction | int]]) -> "PMatrix":
        return cls(ctx, tuple(tuple(PadicScaled.from_fraction(ctx, value) for value in row) for row in rows))

    @classmethod
    def identity(cls, ctx: PrimeContext, n: int) -> "PMatrix":
        return cls.from_fractions(ctx, [[1 if i == j else 0 for j in range(n)] for i in range(n)])

    def __getitem__(self, index: tuple[int, int]) -> PadicScaled:
        i, j = index
        return self.rows[i][j]

    def __matmul__(self, other: "PMatrix") -> "PMatrix":
        size = self.n
        zero = self.ctx.zero()
        result = []
        for i in range(size):
            row = []
            for j in range(size):
                acc = zero
                for k in range(size):
                    left = self.rows[i][k]
                    right = other.rows[k][j]
                    if not (left.is_exact_zero or right.is_exact_zero):
                        acc = acc + left * right
                row.append(acc)
            result.append(tuple(row))
        return PMatrix(self.ctx, tuple(result))

    def transpose(self) -> "PMatrix":
        return PMatrix(self.ctx, tuple(zip(*self.rows)))

    def submatrix(self, row_indices: Sequence[int], col_indices: Sequence[int]) -> "PMatrix":
        return PMatrix(self.ctx, tuple(tuple(self.rows[i][j] for j in col_indices) for i in row_indices))

    def det(self) -> PadicScaled:
        """按第一行 Laplace 展开，跳过精确零，保留 is_exact_zero 信息。"""

        size = self.n
        if size == 0:
            return self.ctx.one()
        if size == 1:
            return self.rows[0][0]
        total = self.ctx.zero()
        rest = range(1, size)
        for j, entry in enumerate(self.rows[0]):
            if entry.is_exact_zero:
                continue
            minor = self.submatrix(rest, [c for c in range(size) if c != j]).det()
            if minor.is_exact_zero:
                continue
            term = entry * minor
            total = total + (term if j % 2 == 0 else -term)
        return total

    def inverse(self) -> "PMatrix":
        determinant = self.det()
        if determinant.is_exact_zero:
            raise NotInvertible("行列式为精确零")
        inv_det = determinant.inverse()
        size = self.n
        rows = []
        for i in range(size):
            row = []
            for j in range(size):
                cofactor = self.submatrix(
                    [r for r in range(size) if r != j],
                    [c for c in range(size) if c != i],
                ).det()
                if (i + j) % 2:
                    cofactor = -cofactor
                row.append(cofactor * inv_det)
            rows.append(tuple(row))
        return PMatrix(self.ctx, tuple(rows))

    def to_fractions(self) -> list[list[Fraction]]:
        return [[entry.to_fraction() for entry in row] for row in self.rows]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PMatrix) or other.n != self.n:
            return NotImplemented
        return all(a == b for row_a, row_b in zip(self.rows, other.rows) for a, b in zip(row_a, row_b))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class UpperUnipotent:
    """对角线为 1 的上三角矩阵；entries 只存 i < j 的位置，缺省为精确零。"""

    ctx: PrimeContext
    n: int
    entries: Mapping[tuple[int, int], PadicScaled]

    def __post_init__(self) -> None:
        for i, j in self.entries:
            if not 0 <= i < j < self.n:
                raise ConfigError(f"上三角幂幺矩阵不允许位置 ({i}, {j})")

    @classmethod
    def from_fractions(
        cls,
        ctx: PrimeContext,
        n: int,
        entries: Mapping[tuple[int, int], Fraction | int],
    ) -> "UpperUnipotent":
        return cls(ctx, n, {key: PadicScaled.from_fraction(ctx, value) for key, value in entries.items()})

    @classmethod
    def identity(cls, ctx: PrimeContext, n: int) -> "UpperUnipotent":
        return cls(ctx, n, {})

    @classmethod
    def from_matrix(cls, g: PMatrix) -> "UpperUnipotent":
        for i in range(g.n):
            below = (g[i, j] for j in range(i))
            if g[i, i] != 1 or any(not (value.is_exact_zero or value.is_zero_at_precision()) for value in below):
                raise ConfigError("矩阵不是上三角幂幺矩阵")
        return cls(g.ctx, g.n, {(i, j): g[i, j] for i in range(g.n) for j in range(i + 1, g.n)})

    def entry(self, i: int, j: int) -> PadicScaled:
        if i == j:
            return self.ctx.one()
        if i > j:
            return self.ctx.zero()
        value = self.entries.get((i, j))
        return self.ctx.zero() if value is None else value

    def superdiagonal(self) -> list[PadicScaled]:
        return [self.entry(i, i + 1) for i in range(self.n - 1)]

    def to_matrix(self) -> PMatrix:
        return PMatrix(
            self.ctx,
            tuple(tuple(self.entry(i, j) for j in range(self.n)) for i in range(self.n)),
        )

    def inverse(self) -> "UpperUnipotent":
        # (I + X)·Y = I，逐列回代
        result: dict[tuple[int, int], PadicScaled] = {}
        for j in range(self.n):
            for i in range(j - 1, -1, -1):
                acc = -self.entry(i, j)
                for k in range(i + 1, j):
                    acc = acc - self.entry(i, k) * result[(k, j)]
                result[(i, j)] = acc
        return UpperUnipotent(self.ctx, self.n, result)

    def to_fractions(self) -> dict[tuple[int, int], Fraction]:
        return {key: value.to_fraction() for key, value in self.entries.items()}


@dataclass(frozen=True)
class TorusDiag:
    """diag(p^{e_1}v_1, …, p^{e_n}v_n)，v_i 是与 p 互素的整数。"""

    ctx: PrimeContext
    exponents: tuple[int, ...]
    units: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.exponents) != len(self.units):
            raise ConfigError("指数与单位的个数不一致")
        for unit in self.units:
            if unit % self.ctx.p == 0:
                raise ConfigError(f"{unit} 不是 {self.ctx.p} 进单位")

    @property
    def n(self) -> int:
        return len(self.exponents)

    @classmethod
    def ladder(cls, ctx: PrimeContext, a: Sequence[int], units: Sequence[int]) -> "TorusDiag":
        """c = diag(p^{a_1}v_1, p^{a_2-a_1}v_2, …, p^{-a_{n-1}}v_n)。"""

        full = [0, *a, 0]
        exponents = tuple(full[i + 1] - full[i] for i in range(len(a) + 1))
        return cls(ctx, exponents, tuple(units))

    def entry(self, i: int) -> PadicScaled:
        return PadicScaled.from_fraction(self.ctx, Fraction(self.ctx.p) ** self.exponents[i] * self.units[i])

    def entry_fraction(self, i: int) -> Fraction:
        return Fraction(self.ctx.p) ** self.exponents[i] * self.units[i]

    def to_matrix(self) -> PMatrix:
        rows = [[self.entry_fraction(i) if i == j else 0 for j in range(self.n)] for i in range(self.n)]
        return PMatrix.from_fractions(self.ctx, rows)

    def ladder_exponents(self) -> tuple[int, ...]:
        """逆推 a_k = e_1 + … + e_k（k < n）。"""

        partial, result = 0, []
        for exponent in self.exponents[:-1]:
            partial += exponent
            result.append(partial)
        return tuple(result)

    def det_valuation(self) -> int:
        return sum(self.exponents)


@dataclass(frozen=True)
class WeylPerm:
    """perm[j] = w(j)；置换矩阵满足 M[w(j)][j] = 1。"""

    perm: tuple[int, ...]

    def __post_init__(self) -> None:
        if sorted(self.perm) != list(range(len(self.perm))):
            raise ConfigError(f"{self.perm} 不是置换")

    @classmethod
    def longest(cls, n: int) -> "WeylPerm":
        return cls(tuple(n - 1 - j for j in range(n)))

    @property
    def n(self) -> int:
        return len(self.perm)

    def is_longest(self) -> bool:
        return self == WeylPerm.longest(self.n)

    def inverse(self) -> "WeylPerm":
        inv = [0] * self.n
        for j, image in enumerate(self.perm):
            inv[image] = j
        return WeylPerm(tuple(inv))

    def int_matrix(self) -> list[list[int]]:
        matrix = [[0] * self.n for _ in range(self.n)]
        for j, image in enumerate(self.perm):
            matrix[image][j] = 1
        return matrix

    def to_matrix(self, ctx: PrimeContext) -> PMatrix:
        return PMatrix.from_fractions(ctx, self.int_matrix())


@dataclass(frozen=True)
class RelevantWeyl:
    """由 n 的组成 (n_1, …, n_r) 给出的相关 Weyl 元 diag(w_{G_{n_1}}, …, w_{G_{n_r}})。"""

    composition: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.composition or any(part < 1 for part in self.composition):
            raise ConfigError(f"非法的组成 {self.composition}")

    @property
    def n(self) -> int:
        return sum(self.composition)

    def blocks(self) -> list[tuple[int, int]]:
        """每块的 (起始下标, 大小)。"""

        start, result = 0, []
        for size in self.composition:
            result.append((start, size))
            start += size
        return result

    def cut_points(self) -> frozenset[int]:
        return frozenset(start for start, _ in self.blocks()[1:])

    def perm(self) -> WeylPerm:
        images = []
        for start, size in self.blocks():
            images.extend(start + size - 1 - offset for offset in range(size))
        return WeylPerm(tuple(images))

    def int_matrix(self) -> list[list[int]]:
        return self.perm().int_matrix()

    def refines(self, other: "RelevantWeyl") -> bool:
        """M_self ⊆ M_other，即 self 的组成比 other 更细。"""

        return self.n == other.n and other.cut_points() <= self.cut_points()

    @property
    def label(self) -> str:
        if all(part == 1 for part in self.composition):
            return "e"
        if len(self.composition) == 1:
            return f"w_G{self.n}"
        return "w(" + ",".join(str(part) for part in self.composition) + ")"


def relevant_weyl_elements(n: int) -> list[RelevantWeyl]:
    """全部 2^{n-1} 个相关 Weyl 元，从单位元 e 排到最长元。"""

    if n < 1:
        raise ConfigError("n 必须 >= 1")
    elements = []
    for mask in range(2 ** (n - 1)):
        parts, current = [], 1
        for position in range(n - 1):
            if mask >> position & 1:
                parts.append(current)
                current = 1
            else:
                current += 1
        parts.append(current)
        elements.append(RelevantWeyl(tuple(parts)))
    elements.sort(key=lambda element: (-len(element.composition), element.composition))
    return elements


def longest_times_torus(w: WeylPerm, c: TorusDiag) -> PMatrix:
    """w·c，只在 (w(j), j) 处非零，其余为精确零。"""

    ctx = c.ctx
    rows = [[ctx.zero() for _ in range(c.n)] for _ in range(c.n)]
    for j, image in enumerate(w.perm):
        rows[image][j] = c.entry(j)
    return PMatrix(ctx, tuple(tuple(row) for row in rows))


# ---------------------------------------------------------------------------
# 子式、Δ 与 δ
# ---------------------------------------------------------------------------


def principal_minor(g: PMatrix, r: int) -> PadicScaled:
    if not 1 <= r <= g.n:
        raise ConfigError(f"r={r} 超出 1..{g.n}")
    return g.submatrix(range(r), range(r)).det()


def delta_big(g: PMatrix) -> Fraction:
    """Δ(g) = |Δ_1² ⋯ Δ_{n-1}² / Δ_n²|，不在开胞腔时为 0。"""

    minors = [principal_minor(g, r) for r in range(1, g.n + 1)]
    if any(minor.is_exact_zero for minor in minors):
        return Fraction(0)
    valuations = [minor.valuation() for minor in minors]
    exponent = 2 * sum(valuations[:-1]) - 2 * valuations[-1]
    return Fraction(1, g.ctx.p**exponent) if exponent >= 0 else Fraction(g.ctx.p ** (-exponent))


def modulus_delta(a: TorusDiag) -> Fraction:
    """δ(a) = |a_1^{n-1} a_2^{n-3} ⋯ a_n^{1-n}|。"""

    n = a.n
    exponent = sum(e * (n - 2 * i - 1) for i, e in enumerate(a.exponents))
    return Fraction(a.ctx.p) ** (-exponent)


def bottom_minors(g: PMatrix, k: int) -> dict[tuple[int, ...], PadicScaled]:
    """末 k 行与每个 k 元列子集 J 的子式，键为 0 起始的列下标元组。"""

    if not 1 <= k <= g.n:
        raise ConfigError(f"k={k} 超出 1..{g.n}")
    bottom = range(g.n - k, g.n)
    return {cols: g.submatrix(bottom, cols).det() for cols in combinations(range(g.n), k)}


def in_Km(g: PMatrix, m: int) -> bool:
    """m >= 1 时判定 g ∈ I + M_n(p^m ℤ_p)；m = 0 时判定 g ∈ GL_n(ℤ_p)。"""

    if m < 0:
        raise ConfigError("m 不能为负")
    if m == 0:
        if not all(entry.is_integral() for row in g.rows for entry in row):
            return False
        return g.det().is_unit()
    for i in range(g.n):
        for j in range(g.n):
            entry = g[i, j] - 1 if i == j else g[i, j]
            if not entry.in_ideal(m):
                return False
    return True


def nk_membership(g: PMatrix, m: int) -> bool:
    """用末行子式判定 g ∈ N(ℚ_p)·K_m（m = 0 时为 N(ℚ_p)·GL_n(ℤ_p)）。"""

    n = g.n
    for k in range(1, n + 1):
        tail = tuple(range(n - k, n))
        minors = bottom_minors(g, k)
        if m == 0:
            if not all(value.is_integral() for value in minors.values()):
                return False
            if not any(value.is_unit() for value in minors.values()):
                return False
            continue
        for cols, value in minors.items():
            if cols == tail:
                if not value.congruent_one(m):
                    return False
            elif not value.in_ideal(m):
                return False
    return True


# ---------------------------------------------------------------------------
# LU 类分解
# ---------------------------------------------------------------------------


def _doolittle(g: PMatrix) -> tuple[list[list[PadicScaled]], list[list[PadicScaled]]]:
    """不选主元的 LU：g = L·U，L 为单位下三角。主元为精确零即不在大胞腔。"""

    ctx = g.ctx
    n = g.n
    upper = [list(row) for row in g.rows]
    lower = [[ctx.one() if i == j else ctx.zero() for j in range(n)] for i in range(n)]
    for k in range(n):
        pivot = upper[k][k]
        if pivot.is_exact_zero:
            raise NotInBigCell(f"第 {k + 1} 个主元为零")
        if pivot.is_zero_at_precision():
            raise PrecisionLoss(f"第 {k + 1} 个主元在当前精度下为零")
        inv = pivot.inverse()
        for i in range(k + 1, n):
            if upper[i][k].is_exact_zero:
                continue
            factor = upper[i][k] * inv
            lower[i][k] = factor
            for j in range(k + 1, n):
                if not upper[k][j].is_exact_zero:
                    upper[i][j] = upper[i][j] - factor * upper[k][j]
            upper[i][k] = ctx.zero()
    return lower, upper


def ul_decompose(h: PMatrix) -> tuple[UpperUnipotent, PMatrix]:
    """h = n_h · b̄，n_h 为上三角幂幺，b̄ 为下三角；通过 J·h·J 的 LU 得到。"""

    n = h.n
    flipped = PMatrix(h.ctx, tuple(tuple(h[n - 1 - i, n - 1 - j] for j in range(n)) for i in range(n)))
    lower, upper = _doolittle(flipped)
    n_h = UpperUnipotent(
        h.ctx,
        n,
        {(i, j): lower[n - 1 - i][n - 1 - j] for i in range(n) for j in range(i + 1, n)},
    )
    b_bar = PMatrix(h.ctx, tuple(tuple(upper[n - 1 - i][n - 1 - j] for j in range(n)) for i in range(n)))
    return n_h, b_bar


def bruhat_extract(g: PMatrix, w: WeylPerm, c: TorusDiag) -> tuple[UpperUnipotent, UpperUnipotent]:
    """求 g = u·(w c)·u′ 中的 u 与 u′；只支持最长元 w。"""

    if not w.is_longest():
        raise ConfigError("bruhat_extract 只支持最长 Weyl 元")
    ctx = g.ctx
    n = g.n
    # (w c)^{-1} g 的第 i 行是 g 的第 w(i) 行除以 c_i
    inv_c = [c.entry(i).inverse() for i in range(n)]
    h = PMatrix(
        ctx,
        tuple(tuple(inv_c[i] * g[w.perm[i], j] for j in range(n)) for i in range(n)),
    )
    lower, upper = _doolittle(h)
    for k in range(n):
        if upper[k][k] != 1:
            raise NotInBigCell("环面部分与给定的 c 不一致")
    u_prime = UpperUnipotent(ctx, n, {(i, j): upper[i][j] for i in range(n) for j in range(i + 1, n)})
    # u = (w c)·L·(w c)^{-1}
    u_entries = {}
    for i in range(n):
        for j in range(i):
            if lower[i][j].is_exact_zero:
                continue
            u_entries[(w.perm[i], w.perm[j])] = c.entry(i) * lower[i][j] * inv_c[j]
    return UpperUnipotent(ctx, n, u_entries), u_prime


def involution_iota(g: PMatrix) -> PMatrix:
    """ι(g) = w·(g^t)^{-1}·w，w 为最长元。"""

    try:
        inv = g.inverse()
    except NotInvertible:
        logger.debug("ι: 矩阵不可逆")
        raise
    n = g.n
    return PMatrix(g.ctx, tuple(tuple(inv[n - 1 - j, n - 1 - i] for j in range(n)) for i in range(n)))
