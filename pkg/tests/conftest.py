from __future__ import annotations

import shutil
from datetime import datetime, timezone
from pathlib import Path

import pytest
from loguru import logger

from impactrag.corpus import Document, Source

FIXTURES = Path(__file__).parent / "fixtures"
MINI = FIXTURES / "harvey_mini"
GOLDEN = Path(__file__).parent / "golden"

logger.remove()


def ts(day: int, hour: int = 12, month: int = 8) -> datetime:
    return datetime(2017, month, day, hour, tzinfo=timezone.utc)


def doc(doc_id: str, text: str, source: Source = Source.TWEET, zip_code: str | None = None,
        when: datetime | None = None) -> Document:
    return Document(doc_id, source, text, when or ts(27), zip_code)


@pytest.fixture
def mini_dir(tmp_path) -> Path:
    """A private copy of the harvey_mini fixture so tests may write next to it."""
    dest = tmp_path / "harvey_mini"
    shutil.copytree(MINI, dest)
    return dest


@pytest.fixture(scope="session")
def mini_engine():
    from impactrag.app.config import load_config
    from impactrag.app.engine import Engine

    return Engine.load(load_config(MINI / "config.yaml"))


# --- acceptance reporting: one PASS/FAIL line per criterion -----------------

_criteria: dict[str, list[bool]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for name in getattr(report, "criteria", ()):
        _criteria.setdefault(name, []).append(report.passed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    report.criteria = [m.args[0] for m in item.iter_markers("criterion")]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, results in _criteria.items():
        status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"{status}  {name}  ({sum(results)}/{len(results)} checks)")
