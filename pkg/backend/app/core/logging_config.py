"""Loguru 配置：终端只看关键事件，文件保留完整的计算日志。

扫描与命令行子命令通过 `log_scope` 给记录打上 scope 字段，文件日志按 scope 区分。
"""

from __future__ import annotations

import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Iterator

from loguru import logger

from app.core.config import Settings, get_settings

LOG_DIR = Path(__file__).resolve().parents[3] / "logs"
FILE_FORMAT = (
    "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {thread.name} | {extra[scope]} | "
    "{name}:{function}:{line} - {message}"
)

_configured = False


def _level_name(value: str | None, fallback: str) -> str:
    name = (value or "").strip().upper()
    if not name:
        return fallback
    try:
        logger.level(name)
    except (ValueError, TypeError):
        return fallback
    return name


def _terminal_filter(settings: Settings) -> Callable[[dict], bool]:
    threshold = logger.level(_level_name(settings.terminal_log_level, "INFO")).no
    warning = logger.level("WARNING").no

    def accept(record: dict) -> bool:
        level = record["level"].no
        if level >= warning or record["extra"].get("key_event"):
            return True
        return not settings.terminal_key_events_only and level >= threshold

    return accept


def log_key_event(level: str, message: str, *args, **kwargs) -> None:
    """扫描开始/结束、报告路径、预算拒绝与恒等式失败，总是显示在终端。"""

    logger.bind(key_event=True).log(_level_name(level, "INFO"), message, *args, **kwargs)


@contextmanager
def log_scope(scope: str) -> Iterator[None]:
    """with 块内（当前线程）的记录带上 scope，例如 "sweep-weil" 或 "cli-sum"。"""

    with logger.contextualize(scope=scope):
        yield


def configure_logging(force: bool = False, settings: Settings | None = None) -> None:
    global _configured
    if _configured and not force:
        return

    settings = settings or get_settings()
    logger.remove()
    logger.configure(extra={"scope": "-"})
    # stdout 留给 CLI 的 JSON 结果
    logger.add(
        sys.stderr,
        level=_level_name(settings.terminal_log_level, "INFO"),
        filter=_terminal_filter(settings),
        enqueue=True,
        backtrace=False,
        diagnose=False,
    )
    if settings.log_to_file:
        LOG_DIR.mkdir(parents=True, exist_ok=True)
        logger.add(
            LOG_DIR / "runtime.log",
            level=_level_name(settings.file_log_level, "DEBUG"),
            format=FILE_FORMAT,
            rotation=settings.file_log_rotation,
            retention=settings.file_log_retention,
            enqueue=True,
            encoding="utf-8",
            backtrace=True,
            diagnose=False,
        )
    _configured = True
