import pytest

# (criterion id, passed, detail) tuples filled in by test_acceptance.py
ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    def record(cid: str, passed: bool, detail: str):
        ACCEPTANCE_LINES.append((cid, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for cid, passed, detail in sorted(ACCEPTANCE_LINES, key=lambda t: int(t[0].split()[0])):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {cid}: {detail}")
