import pytest

_LINES = {}


@pytest.fixture(scope="session")
def criterion_log():
    """Record one PASS/FAIL line per acceptance criterion."""

    def log(number, passed, detail):
        line = f"CRITERION {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _LINES[number] = line
        print(line, flush=True)
        return passed

    return log


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_LINES):
        terminalreporter.write_line(_LINES[number])
