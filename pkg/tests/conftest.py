import pytest

_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def _report(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {label}: {detail}"
        _LINES.append(line)
        print(line)
        assert ok, line
    return _report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
