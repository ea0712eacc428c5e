import pytest

ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record ``(criterion, passed, detail)`` for the end-of-run summary."""

    def record(number, title, passed, detail):
        ACCEPTANCE[number] = (title, bool(passed), detail)
        print(_line(number, title, passed, detail))

    return record


def _line(number, title, passed, detail):
    return f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(_line(number, *ACCEPTANCE[number]))
