from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from sympy import isprime

from app.models.enums import CheckName, PathKind
from app.schemas.kloosterman import _check_rationals


class SweepConfig(BaseModel):
    """参数网格：对 n、p、m 以及指数向量取笛卡尔积；列表为空即得到空报告。"""

    check: CheckName
    n: list[int] = Field(default_factory=lambda: [2])
    p: list[int] = Field(default_factory=lambda: [2])
    m: list[int] = Field(default_factory=lambda: [1])
    a_values: list[int] = Field(default_factory=lambda: [1], description="每个 a_i 的取值范围")
    exponents: list[list[int]] | None = Field(default=None, description="显式给出的指数向量，优先于 a_values；dr 检查中为额外的余特征")
    units: list[int] | None = None
    nu: list[str] | None = None
    nu_prime: list[str] | None = None
    ell: list[int] = Field(default_factory=lambda: [0, 1, 2], description="weil 检查的 ℓ 取值")
    height: int = Field(2, ge=0, description="dr 检查中余特征各分量绝对值的上限")
    delta: str | None = Field(default=None, description="germ-decay 的 δ，有理数字符串")
    rays: list[list[int]] = Field(default_factory=list, description="germ-decay 沿射线的指数向量")
    epsilon: str = Field("1/100", description="平凡界 p^{(1+ε)Σa} 中的 ε")
    workers: int | None = Field(default=None, ge=1)

    @field_validator("p")
    @classmethod
    def _primes(cls, values: list[int]) -> list[int]:
        for value in values:
            if not isprime(value):
                raise ValueError(f"{value} 不是素数")
        return values

    @field_validator("n")
    @classmethod
    def _sizes(cls, values: list[int]) -> list[int]:
        if any(value < 1 or value > 6 for value in values):
            raise ValueError("n 必须在 1..6 之间")
        return values

    @field_validator("m")
    @classmethod
    def _levels(cls, values: list[int]) -> list[int]:
        if any(value < 1 for value in values):
            raise ValueError("层级 m 必须 >= 1")
        return values

    @field_validator("a_values", "ell")
    @classmethod
    def _non_negative(cls, values: list[int]) -> list[int]:
        if any(value < 0 for value in values):
            raise ValueError("指数不能为负")
        return values

    @field_validator("nu", "nu_prime")
    @classmethod
    def _rationals(cls, values: list[str] | None) -> list[str] | None:
        return _check_rationals(values)

    @model_validator(mode="after")
    def _germ_decay_needs_delta(self) -> "SweepConfig":
        if self.check == CheckName.GERM_DECAY and self.delta is None:
            raise ValueError("germ-decay 检查需要 delta")
        return self


class BoundReportRow(BaseModel):
    p: int
    m: int
    n: int
    a: list[int]
    units: list[int] = Field(default_factory=list)
    nu: list[str] = Field(default_factory=list)
    nu_prime: list[str] = Field(default_factory=list)
    cell_size: int = 0
    magnitude: float = 0.0
    bound: float | None = None
    ratio: float | None = None
    path: PathKind
    passed: bool | None = None
    elapsed_ms: int = 0
    detail: dict[str, Any] = Field(default_factory=dict)

    model_config = ConfigDict(use_enum_values=True)


class SweepSummary(BaseModel):
    check: CheckName
    total: int
    passed: int
    failed: int
    skipped: int
    max_ratio: float | None = None
    thresholds: dict[str, int | None] = Field(default_factory=dict, description="各 n 的非平凡性阈值 Σa")
    json_path: str | None = None
    csv_path: str | None = None

    model_config = ConfigDict(use_enum_values=True)

    @property
    def ok(self) -> bool:
        return self.failed == 0
