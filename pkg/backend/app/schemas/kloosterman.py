from fractions import Fraction
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from sympy import isprime

from app.models.enums import PathKind


def _check_prime(value: int) -> int:
    if not isprime(value):
        raise ValueError(f"{value} 不是素数")
    return value


def _check_rationals(values: list[str] | None) -> list[str] | None:
    if values is None:
        return None
    for value in values:
        try:
            parsed = Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"无法解析有理数 {value!r}") from exc
        if parsed == 0:
            raise ValueError("ν 分量不能为 0")
    return values


class CellParams(BaseModel):
    """一个胞腔的完整参数；ν 与 ν′ 用 "1/3" 形式的有理数字符串传递。"""

    n: int = Field(..., ge=1, le=6)
    p: int
    m: int = Field(1, ge=1)
    a: list[int]
    units: list[int] | None = None
    nu: list[str] | None = None
    nu_prime: list[str] | None = None

    @field_validator("p")
    @classmethod
    def _prime(cls, value: int) -> int:
        return _check_prime(value)

    @field_validator("nu", "nu_prime")
    @classmethod
    def _rationals(cls, values: list[str] | None) -> list[str] | None:
        return _check_rationals(values)

    @model_validator(mode="after")
    def _lengths(self) -> "CellParams":
        if len(self.a) != self.n - 1:
            raise ValueError(f"a 需要 {self.n - 1} 个分量")
        if self.units is not None and len(self.units) != self.n:
            raise ValueError(f"units 需要 {self.n} 个分量")
        return self


class SumRequest(CellParams):
    fast_gl4: bool = False


class GermRequest(CellParams):
    """relevant 为组成时，a 视作整个 n 阶环面的阶梯指数，在切点处必须为 0。"""

    relevant: list[int] | None = None


class OrbitalRequest(BaseModel):
    p: int
    exponents: list[int] = Field(..., min_length=1, description="余特征 λ_a 的各分量")
    units: list[int] | None = None
    oracle: bool = False

    @field_validator("p")
    @classmethod
    def _prime(cls, value: int) -> int:
        return _check_prime(value)


class SumReport(BaseModel):
    params: dict[str, Any]
    cell_size: int
    sum: dict[str, Any]
    complex: list[float]
    magnitude: float
    bound: float | None = None
    ratio: float | None = None
    path: PathKind
    elapsed_ms: int

    model_config = ConfigDict(use_enum_values=True)


class OrbitalReport(BaseModel):
    exponents: list[int]
    dr_value: str
    dr_float: float
    decomposition_count: int
    r_estimate: int
    bruteforce: int | None = None


class GermReport(BaseModel):
    composition: list[int]
    normalization: str
    value: dict[str, Any]
    magnitude: float
