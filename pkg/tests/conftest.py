import pytest

CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record ``(passed, detail)`` for an acceptance criterion, then assert it."""

    def record(number: int, passed: bool, detail: str):
        CRITERIA[number] = (bool(passed), detail)
        print(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
        assert passed, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        passed, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
