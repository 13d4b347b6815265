import pytest

from critballs.tracywidom import default_solution

_ACCEPTANCE = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    """Log one acceptance line; printed again in the terminal summary."""
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    _ACCEPTANCE.append((number, line))
    print(line)


@pytest.fixture(scope="session")
def painleve():
    return default_solution()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE, key=lambda item: item[0]):
        terminalreporter.write_line(line)
