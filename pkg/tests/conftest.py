"""Shared fixtures and the acceptance-criterion reporter."""

import pytest

_CRITERIA: list[str] = []


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
    _CRITERIA.append(line)
    print(line)


@pytest.fixture
def criterion():
    """Report a pass/fail line for an acceptance criterion, then assert it."""

    def check(name: str, passed: bool, detail: str = "") -> None:
        record_criterion(name, passed, detail)
        assert passed, f"{name}: {detail}"

    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
