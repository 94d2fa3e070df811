import pytest
from loguru import logger

from app.core.config import Settings
from app.core.logging_config import _terminal_filter, configure_logging, log_key_event, log_scope


@pytest.fixture
def records():
    captured: list[dict] = []
    sink_id = logger.add(lambda message: captured.append(message.record), level="DEBUG")
    yield captured
    logger.remove(sink_id)


def test_scope_is_attached_inside_block(records):
    with log_scope("sweep-weil"):
        logger.info("inside")
    logger.info("outside")
    assert records[0]["extra"]["scope"] == "sweep-weil"
    assert records[1]["extra"].get("scope", "-") == "-"


def test_key_events_are_marked(records):
    log_key_event("info", "报告已写入 {}", "reports/weil.json")
    log_key_event("no-such-level", "fallback")
    assert [record["level"].name for record in records] == ["INFO", "INFO"]
    assert all(record["extra"]["key_event"] for record in records)
    assert records[0]["message"] == "报告已写入 reports/weil.json"


def test_terminal_filter_keeps_key_events_and_warnings(records):
    settings = Settings(log_to_file=False, terminal_key_events_only=True)
    accept = _terminal_filter(settings)
    logger.info("plain")
    log_key_event("INFO", "key")
    logger.warning("warn")
    assert [accept(record) for record in records] == [False, True, True]
    verbose = _terminal_filter(Settings(log_to_file=False, terminal_key_events_only=False))
    assert verbose(records[0])


def test_configure_logging_without_file_sink(tmp_path):
    configure_logging(force=True, settings=Settings(log_to_file=False))
    logger.info("still works")
