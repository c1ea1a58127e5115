"""Acceptance bookkeeping: tests record a verdict per criterion, the summary prints one line each."""

import pytest

ACCEPTANCE: dict[int, tuple[bool, str]] = {}
CRITERIA = range(1, 11)


@pytest.fixture
def record_criterion():
    def record(number: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[number] = (bool(ok), detail)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    collected = [item for item in terminalreporter.stats.get("passed", []) + terminalreporter.stats.get("failed", [])
                 if "test_acceptance" in item.nodeid]
    if not collected and not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in CRITERIA:
        ok, detail = ACCEPTANCE.get(number, (False, "not run"))
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
