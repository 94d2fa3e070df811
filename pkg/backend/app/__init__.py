"""GL(n) 局部 Kloosterman 和计算包；导入时完成日志配置。"""

from app.core.logging_config import configure_logging

configure_logging()
