import os

# 测试期间不写 logs/runtime.log；必须在导入 app 之前设置
os.environ.setdefault("KLOOSTERMAN_LOG_TO_FILE", "false")

import pytest  # noqa: E402

from app.core.config import Settings  # noqa: E402


@pytest.fixture
def settings(tmp_path) -> Settings:
    """单线程、报告写入临时目录的配置。"""

    return Settings(
        enumeration_workers=1,
        sweep_workers=1,
        log_to_file=False,
        report_dir=str(tmp_path / "reports"),
    )


@pytest.fixture
def tight_settings(tmp_path) -> Settings:
    return Settings(
        enumeration_workers=1,
        sweep_workers=1,
        log_to_file=False,
        enumeration_budget=1,
        bruteforce_budget=1,
        report_dir=str(tmp_path / "reports"),
    )
