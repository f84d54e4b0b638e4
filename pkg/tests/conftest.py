import importlib.resources
from pathlib import Path

import pytest

from gabm.scenario import parse_scenario

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"

_acceptance: list[tuple[str, str]] = []


def connectnet_text() -> str:
    return (importlib.resources.files("gabm") / "templates" / "connectnet.scenario").read_text(encoding="utf-8")


@pytest.fixture
def connectnet():
    return parse_scenario(connectnet_text())


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))
    elif report.when == "setup" and report.skipped and "test_acceptance.py" in report.nodeid:
        _acceptance.append((report.nodeid.split("::")[-1], "skipped"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        label = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"{label:7} {name}")
