"""集中管理所有可调参数，方便在 .env 中修改后被整个计算流程复用。"""

from functools import lru_cache
from pathlib import Path

from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# 从 backend/app/core/config.py 向上3级到项目根目录
_PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent.parent


class Settings(BaseSettings):
    """Settings 会在首次加载时读取项目根目录下的 .env（前缀 KLOOSTERMAN_）。"""

    app_name: str = "Kloosterman Bench"
    precision_factor: int = Field(4, description="工作精度放大系数，W = 系数 × (n(ℓ+m)+m+保护位)")
    guard_digits: int = Field(2, description="精度公式中的保护位数")
    cyclo_flush_every: int = Field(65536, description="分圆累加器每累积多少项做一次规范化")
    enumeration_budget: int = Field(10**8, description="Kloosterman 胞腔枚举的候选上限，超过即报 Infeasible")
    bruteforce_budget: int = Field(10**8, description="轨道积分暴力计数的候选上限")
    enumeration_workers: int | None = Field(
        default=None,
        description="枚举线程数，为空时按 CPU 核心数自动推导",
    )
    sweep_workers: int | None = Field(default=None, description="参数扫描线程数，为空时按 CPU 核心数自动推导")
    report_dir: str = Field("reports", description="扫描报告（JSON/CSV）的输出目录，相对路径基于项目根目录")
    weil_tolerance: float = Field(1e-6, description="Weil 界比较时允许的相对误差")
    magnitude_tolerance: float = Field(1e-9, description="模长比较（对合对称等）的浮点容差")

    terminal_log_level: str = Field("INFO", description="终端日志最低级别（INFO/DEBUG/WARNING等）")
    terminal_key_events_only: bool = Field(True, description="是否只在终端输出关键事件（仍会显示WARNING及以上）")
    file_log_level: str = Field("DEBUG", description="写入日志文件的最低级别")
    file_log_rotation: str = Field("1 day", description="日志文件轮转策略，例如 '1 day' 或 '100 MB'")
    file_log_retention: str = Field("7 days", description="日志文件的保留时间或数量，例如 '7 days' 或 '10 files'")
    log_to_file: bool = Field(True, description="是否写入 logs/runtime.log")

    model_config = SettingsConfigDict(
        env_prefix="KLOOSTERMAN_",
        env_file=str(_PROJECT_ROOT / ".env"),
        env_file_encoding="utf-8",
        extra="ignore",
    )

    @model_validator(mode="before")
    @classmethod
    def _normalize_empty_values(cls, values):
        """把 .env 中的空字符串转为 None，避免类型校验报错。"""

        if isinstance(values, dict):
            for key in ("enumeration_workers", "sweep_workers"):
                if values.get(key) == "":
                    values[key] = None
        return values

    @field_validator("precision_factor", "enumeration_budget", "bruteforce_budget", "cyclo_flush_every")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("必须为正整数")
        return value

    @field_validator("enumeration_workers", "sweep_workers")
    @classmethod
    def _positive_workers(cls, value: int | None) -> int | None:
        if value is not None and value < 1:
            raise ValueError("线程数必须 >= 1")
        return value

    @field_validator("guard_digits")
    @classmethod
    def _non_negative_guard(cls, value: int) -> int:
        if value < 0:
            raise ValueError("保护位不能为负")
        return value

    @field_validator("weil_tolerance", "magnitude_tolerance")
    @classmethod
    def _non_negative_tolerance(cls, value: float) -> float:
        if value < 0:
            raise ValueError("容差不能为负")
        return value

    def report_path(self) -> Path:
        path = Path(self.report_dir)
        if not path.is_absolute():
            path = _PROJECT_ROOT / path
        return path


@lru_cache
def get_settings() -> Settings:
    return Settings()
