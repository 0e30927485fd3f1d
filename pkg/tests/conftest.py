import pytest

_LINES = []


@pytest.fixture
def acceptance_record():
    """Collects ``(criterion, passed, detail)`` lines for the terminal summary."""
    return lambda number, passed, detail: _LINES.append((number, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_LINES):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
