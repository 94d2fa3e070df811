"""截断 p 进数、标准加法特征 ξ 以及分圆整数的精确累加。

所有特征和都落在 ℤ[ζ_N] 中（N = d·p^L），这里用系数向量精确表示，
只有在需要模长时才转成浮点。
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np
from loguru import logger
from sympy import cyclotomic_poly, isprime, multiplicity

from app.core.config import Settings, get_settings
from app.core.errors import ConfigError, NotInvertible, PrecisionLoss, ScaleOverflow


@dataclass(frozen=True)
class PrimeContext:
    """素数 p、工作精度 W（位数）与分圆阶指数 L（单位根阶 p^L）。"""

    p: int
    W: int
    L: int

    def __post_init__(self) -> None:
        if not isprime(self.p):
            raise ConfigError(f"p={self.p} 不是素数")
        if self.W < 1 or self.L < 1:
            raise ConfigError(f"精度参数非法: W={self.W}, L={self.L}")

    @staticmethod
    def minimum_precision(n: int, ell: int, m: int, guard_digits: int = 2) -> int:
        return n * (ell + m) + m + guard_digits

    @classmethod
    def for_cell(
        cls,
        p: int,
        n: int,
        ell: int,
        m: int,
        settings: Settings | None = None,
    ) -> "PrimeContext":
        settings = settings or get_settings()
        minimum = cls.minimum_precision(n, ell, m, settings.guard_digits)
        return cls(p=p, W=settings.precision_factor * max(minimum, 1), L=max(1, ell + 2 * m))

    def check_cell(self, n: int, ell: int, m: int) -> None:
        needed = self.minimum_precision(n, ell, m)
        if self.W < needed:
            raise ConfigError(f"工作精度 W={self.W} 低于 n={n}, ℓ={ell}, m={m} 所需的 {needed}")

    def zero(self) -> "PadicScaled":
        return PadicScaled.exact_zero(self)

    def one(self) -> "PadicScaled":
        return PadicScaled.from_int(self, 1)

    def scalar(self, value: int | Fraction) -> "PadicScaled":
        return PadicScaled.from_fraction(self, value)


def fraction_valuation(value: Fraction | int, p: int) -> int | float:
    value = Fraction(value)
    if value == 0:
        return math.inf
    return int(multiplicity(p, abs(value.numerator))) - int(multiplicity(p, value.denominator))


def fraction_residue(value: Fraction | int, p: int, k: int) -> int:
    """p 进整的有理数模 p^k 的代表元。"""

    value = Fraction(value)
    if value.denominator % p == 0:
        raise ConfigError(f"{value} 不是 {p} 进整数")
    modulus = p**k
    return value.numerator * pow(value.denominator, -1, modulus) % modulus


def _as_padic(ctx: PrimeContext, value: "PadicScaled | int | Fraction") -> "PadicScaled":
    if isinstance(value, PadicScaled):
        return value
    return PadicScaled.from_fraction(ctx, value)


@dataclass(frozen=True, eq=False)
class PadicScaled:
    """值 ≡ num · p^{-scale} (mod p^{prec})，num 取在 [0, p^{prec+scale}) 内。

    prec 是绝对精度；is_exact_zero 区分"已知为 0"和"在当前精度下为 0"。
    """

    ctx: PrimeContext
    num: int
    scale: int
    prec: int
    is_exact_zero: bool = False

    @classmethod
    def exact_zero(cls, ctx: PrimeContext) -> "PadicScaled":
        return cls(ctx, 0, 0, ctx.W, True)

    @classmethod
    def _make(cls, ctx: PrimeContext, num: int, scale: int, prec: int) -> "PadicScaled":
        p = ctx.p
        if prec + scale <= 0:
            return cls(ctx, 0, 0, prec)
        num %= p ** (prec + scale)
        while scale > 0 and num % p == 0:
            num //= p
            scale -= 1
        return cls(ctx, num, scale, prec)

    @classmethod
    def from_int(cls, ctx: PrimeContext, value: int, prec: int | None = None) -> "PadicScaled":
        if value == 0:
            return cls.exact_zero(ctx)
        return cls._make(ctx, value, 0, ctx.W if prec is None else prec)

    @classmethod
    def from_fraction(
        cls,
        ctx: PrimeContext,
        value: Fraction | int,
        prec: int | None = None,
    ) -> "PadicScaled":
        value = Fraction(value)
        if value == 0:
            return cls.exact_zero(ctx)
        prec = ctx.W if prec is None else prec
        scale = multiplicity(ctx.p, value.denominator)
        den_unit = value.denominator // ctx.p**scale
        if prec + scale <= 0:
            return cls(ctx, 0, 0, prec)
        modulus = ctx.p ** (prec + scale)
        return cls._make(ctx, value.numerator * pow(den_unit, -1, modulus), scale, prec)

    # ---- 查询 ----

    def valuation(self) -> int | float:
        if self.is_exact_zero:
            return math.inf
        if self.num == 0:
            raise PrecisionLoss(f"值在精度 p^{self.prec} 下为 0，无法确定赋值")
        return int(multiplicity(self.ctx.p, self.num)) - self.scale

    def _valuation_floor(self) -> int | float:
        if self.is_exact_zero:
            return math.inf
        if self.num == 0:
            return self.prec
        return int(multiplicity(self.ctx.p, self.num)) - self.scale

    def is_zero_at_precision(self) -> bool:
        return not self.is_exact_zero and self.num == 0

    def in_ideal(self, k: int) -> bool:
        """值是否落在 p^k ℤ_p 中。"""

        if self.is_exact_zero:
            return True
        if self.num != 0:
            return self.valuation() >= k
        if self.prec >= k:
            return True
        raise PrecisionLoss(f"精度 p^{self.prec} 不足以判断是否属于 p^{k}")

    def congruent_one(self, k: int) -> bool:
        return (self - 1).in_ideal(k)

    def is_integral(self) -> bool:
        return self.in_ideal(0)

    def is_unit(self) -> bool:
        if self.is_exact_zero:
            return False
        if self.num != 0:
            return self.valuation() == 0
        if self.prec >= 1:
            return False
        raise PrecisionLoss("精度不足以判断是否为单位")

    def residue(self, k: int) -> int:
        """整数值模 p^k 的代表元。"""

        if self.is_exact_zero or k <= 0:
            return 0
        if self.scale > 0:
            raise ConfigError(f"{self!r} 不是 p 进整数")
        if self.prec < k:
            raise PrecisionLoss(f"精度 p^{self.prec} 不足以取模 p^{k}")
        return self.num % self.ctx.p**k

    def to_fraction(self) -> Fraction:
        if self.is_exact_zero:
            return Fraction(0)
        return Fraction(self.num, self.ctx.p**self.scale)

    # ---- 运算 ----

    def __add__(self, other: "PadicScaled | int | Fraction") -> "PadicScaled":
        other = _as_padic(self.ctx, other)
        if self.is_exact_zero:
            return other
        if other.is_exact_zero:
            return self
        p = self.ctx.p
        scale = max(self.scale, other.scale)
        num = self.num * p ** (scale - self.scale) + other.num * p ** (scale - other.scale)
        return PadicScaled._make(self.ctx, num, scale, min(self.prec, other.prec))

    __radd__ = __add__

    def __neg__(self) -> "PadicScaled":
        if self.is_exact_zero:
            return self
        return PadicScaled._make(self.ctx, -self.num, self.scale, self.prec)

    def __sub__(self, other: "PadicScaled | int | Fraction") -> "PadicScaled":
        return self + (-_as_padic(self.ctx, other))

    def __rsub__(self, other: "PadicScaled | int | Fraction") -> "PadicScaled":
        return _as_padic(self.ctx, other) - self

    def __mul__(self, other: "PadicScaled | int | Fraction") -> "PadicScaled":
        other = _as_padic(self.ctx, other)
        if self.is_exact_zero or other.is_exact_zero:
            return PadicScaled.exact_zero(self.ctx)
        prec = min(self.prec + other._valuation_floor(), other.prec + self._valuation_floor())
        return PadicScaled._make(self.ctx, self.num * other.num, self.scale + other.scale, int(prec))

    __rmul__ = __mul__

    def inverse(self) -> "PadicScaled":
        if self.is_exact_zero:
            raise NotInvertible("精确零不可逆")
        if self.num == 0:
            raise PrecisionLoss("值在当前精度下为 0，无法求逆")
        p = self.ctx.p
        t = int(multiplicity(p, self.num))
        v = t - self.scale
        relative = self.prec - v
        inv = pow(self.num // p**t, -1, p**relative)
        if v > 0:
            return PadicScaled._make(self.ctx, inv, v, self.prec - 2 * v)
        return PadicScaled._make(self.ctx, inv * p ** (-v), 0, self.prec - 2 * v)

    def __truediv__(self, other: "PadicScaled | int | Fraction") -> "PadicScaled":
        return self * _as_padic(self.ctx, other).inverse()

    def __rtruediv__(self, other: "PadicScaled | int | Fraction") -> "PadicScaled":
        return _as_padic(self.ctx, other) * self.inverse()

    def __pow__(self, exponent: int) -> "PadicScaled":
        base = self if exponent >= 0 else self.inverse()
        result = self.ctx.one()
        for _ in range(abs(exponent)):
            result = result * base
        return result

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, (PadicScaled, int, Fraction)):
            return NotImplemented
        diff = self - other
        return diff.is_exact_zero or diff.num == 0

    def __repr__(self) -> str:
        if self.is_exact_zero:
            return f"PadicScaled(p={self.ctx.p}, 0 exact)"
        return f"PadicScaled(p={self.ctx.p}, {self.num}/{self.ctx.p}^{self.scale} + O({self.ctx.p}^{self.prec}))"


def xi_of(x: PadicScaled, ctx: PrimeContext) -> int:
    """标准加法特征 ξ(x) = exp(2πi·frac_p(x))，返回 k 使 frac_p(x) = k / p^L。"""

    if x.is_exact_zero or x.scale == 0:
        if x.prec < 0:
            raise PrecisionLoss("整数部分之外的信息已丢失")
        return 0
    if x.scale > ctx.L:
        raise ScaleOverflow(f"分母 p^{x.scale} 超过分圆阶 p^{ctx.L}")
    if x.prec < 0:
        raise PrecisionLoss(f"精度 p^{x.prec} 不足以确定小数部分")
    p = ctx.p
    return (x.num % p**x.scale) * p ** (ctx.L - x.scale) % p**ctx.L


# ---------------------------------------------------------------------------
# 分圆整数
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _cyclotomic_tail(order: int) -> tuple[int, tuple[tuple[int, int], ...]]:
    """Φ_N 的次数，以及去掉首项后的非零项 (指数, 系数)。"""

    poly = cyclotomic_poly(order, polys=True)
    degree = int(poly.degree())
    tail = tuple(
        (degree - index, int(coeff))
        for index, coeff in enumerate(poly.all_coeffs())
        if index > 0 and coeff != 0
    )
    return degree, tail


def _canonicalize(coeffs: list[int], order: int) -> list[int]:
    """原地对 Φ_N 取余；对 N = p^L，这正是把指数 a+(p-1)p^{L-1} 处的系数消成 0。"""

    degree, tail = _cyclotomic_tail(order)
    for exponent in range(order - 1, degree - 1, -1):
        coeff = coeffs[exponent]
        if coeff:
            coeffs[exponent] = 0
            shift = exponent - degree
            for power, value in tail:
                coeffs[shift + power] -= coeff * value
    return coeffs


@dataclass(frozen=True, eq=False)
class CycloSum:
    """ℤ[ζ_N] 中的元素，N = tame · p^{order_exp}，系数按指数 k 排列（项为 coeff_k·ζ_N^k）。"""

    p: int
    order_exp: int
    coeffs: tuple[int, ...]
    tame: int = 1

    @property
    def order(self) -> int:
        return self.tame * self.p**self.order_exp

    @classmethod
    def _build(cls, p: int, order_exp: int, tame: int, raw: list[int]) -> "CycloSum":
        order = tame * p**order_exp
        return cls(p, order_exp, tuple(_canonicalize(raw, order)), tame)

    @classmethod
    def zero(cls, p: int, order_exp: int, tame: int = 1) -> "CycloSum":
        return cls(p, order_exp, (0,) * (tame * p**order_exp), tame)

    @classmethod
    def monomial(cls, p: int, order_exp: int, exponent: int, weight: int = 1, tame: int = 1) -> "CycloSum":
        order = tame * p**order_exp
        raw = [0] * order
        raw[exponent % order] = weight
        return cls._build(p, order_exp, tame, raw)

    @classmethod
    def from_terms(
        cls,
        p: int,
        order_exp: int,
        terms: Iterable[tuple[int, int]],
        tame: int = 1,
    ) -> "CycloSum":
        order = tame * p**order_exp
        raw = [0] * order
        for exponent, weight in terms:
            raw[exponent % order] += weight
        return cls._build(p, order_exp, tame, raw)

    # ---- 阶的对齐 ----

    def embed(self, order_exp: int, tame: int | None = None) -> "CycloSum":
        tame = self.tame if tame is None else tame
        target = tame * self.p**order_exp
        if target % self.order:
            raise ValueError(f"阶 {self.order} 不整除 {target}")
        if target == self.order:
            return self
        factor = target // self.order
        raw = [0] * target
        for exponent, coeff in enumerate(self.coeffs):
            if coeff:
                raw[exponent * factor] = coeff
        return CycloSum._build(self.p, order_exp, tame, raw)

    def _aligned(self, other: "CycloSum") -> tuple["CycloSum", "CycloSum"]:
        if other.p != self.p:
            raise ValueError("不同素数的分圆和不能混合运算")
        order_exp = max(self.order_exp, other.order_exp)
        tame = math.lcm(self.tame, other.tame)
        return self.embed(order_exp, tame), other.embed(order_exp, tame)

    # ---- 环运算 ----

    def __add__(self, other: "CycloSum") -> "CycloSum":
        left, right = self._aligned(other)
        return CycloSum(left.p, left.order_exp, tuple(a + b for a, b in zip(left.coeffs, right.coeffs)), left.tame)

    def __neg__(self) -> "CycloSum":
        return CycloSum(self.p, self.order_exp, tuple(-c for c in self.coeffs), self.tame)

    def __sub__(self, other: "CycloSum") -> "CycloSum":
        return self + (-other)

    def __mul__(self, other: "CycloSum | int") -> "CycloSum":
        if isinstance(other, int):
            return CycloSum(self.p, self.order_exp, tuple(c * other for c in self.coeffs), self.tame)
        left, right = self._aligned(other)
        order = left.order
        raw = [0] * order
        right_terms = [(k, c) for k, c in enumerate(right.coeffs) if c]
        for i, a in enumerate(left.coeffs):
            if a:
                for j, b in right_terms:
                    raw[(i + j) % order] += a * b
        return CycloSum._build(left.p, left.order_exp, left.tame, raw)

    __rmul__ = __mul__

    def conj(self) -> "CycloSum":
        """复共轭：指数取负。"""

        order = self.order
        raw = [0] * order
        for exponent, coeff in enumerate(self.coeffs):
            if coeff:
                raw[(-exponent) % order] += coeff
        return CycloSum._build(self.p, self.order_exp, self.tame, raw)

    def exact_divide(self, divisor: int) -> "CycloSum":
        # 规范形是 ℤ[ζ_N] 的 ℤ-基坐标，整除等价于每个坐标整除
        if divisor == 0 or any(c % divisor for c in self.coeffs):
            raise ValueError(f"分圆和不能被 {divisor} 整除")
        return CycloSum(self.p, self.order_exp, tuple(c // divisor for c in self.coeffs), self.tame)

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CycloSum):
            return NotImplemented
        if other.p != self.p:
            return False
        left, right = self._aligned(other)
        return left.coeffs == right.coeffs

    __hash__ = None  # type: ignore[assignment]

    # ---- 数值与序列化 ----

    def terms(self) -> list[tuple[int, int]]:
        return [(k, c) for k, c in enumerate(self.coeffs) if c]

    def l1_norm(self) -> int:
        return sum(abs(c) for c in self.coeffs)

    def to_complex(self) -> complex:
        order = self.order
        roots = np.exp(2j * np.pi * np.arange(order) / order)
        weights = np.array([float(c) for c in self.coeffs], dtype=np.float64)
        return complex(np.dot(weights, roots))

    def magnitude(self) -> float:
        return float(abs(self.to_complex()))

    def to_payload(self) -> dict:
        payload: dict = {"order_exp": self.order_exp, "coeffs": [[k, c] for k, c in self.terms()]}
        if self.tame != 1:
            payload["tame"] = self.tame
        return payload

    def __repr__(self) -> str:
        body = " + ".join(f"{c}·ζ^{k}" for k, c in self.terms()) or "0"
        return f"CycloSum(N={self.order}: {body})"


class CycloAccumulator:
    """可变累加器：每累积 flush_every 项做一次规范化，freeze() 时得到 CycloSum。"""

    def __init__(
        self,
        p: int,
        order_exp: int,
        tame: int = 1,
        flush_every: int | None = None,
        settings: Settings | None = None,
    ) -> None:
        self.p = p
        self.order_exp = order_exp
        self.tame = tame
        self.order = tame * p**order_exp
        self.flush_every = flush_every or (settings or get_settings()).cyclo_flush_every
        self._coeffs = [0] * self.order
        self._pending = 0
        self.count = 0

    def add(self, exponent: int, weight: int = 1) -> None:
        self._coeffs[exponent % self.order] += weight
        self.count += 1
        self._pending += 1
        if self._pending >= self.flush_every:
            self._flush()

    def add_sum(self, value: CycloSum) -> None:
        embedded = value.embed(self.order_exp, self.tame)
        for exponent, coeff in embedded.terms():
            self._coeffs[exponent] += coeff
        self._pending += 1

    def merge(self, other: "CycloAccumulator") -> None:
        self.add_sum(other.freeze())
        self.count += other.count

    def _flush(self) -> None:
        _canonicalize(self._coeffs, self.order)
        self._pending = 0

    def freeze(self) -> CycloSum:
        self._flush()
        return CycloSum(self.p, self.order_exp, tuple(self._coeffs), self.tame)


def cyclo_accumulate(acc: CycloSum, exponent: int, weight: int) -> CycloSum:
    """acc + weight·ζ^{exponent}，立即规范化。"""

    return acc + CycloSum.monomial(acc.p, acc.order_exp, exponent, weight, acc.tame)


def cyclo_magnitude(value: CycloSum) -> float:
    """|Σ coeff_k ζ^k| 的双精度值，绝对误差不超过 (Σ|coeff|)·1e-12。"""

    magnitude = value.magnitude()
    logger.debug("分圆和模长 {:.6f}（阶 {}，L1 范数 {}）", magnitude, value.order, value.l1_norm())
    return magnitude
