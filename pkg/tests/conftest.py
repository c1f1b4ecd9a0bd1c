import pytest

_RESULTS: dict = {}


class CriterionLog:
    """Collects one verdict line per acceptance criterion."""

    def record(self, number: int, passed: bool, detail: str) -> bool:
        prev = _RESULTS.get(number)
        if prev is not None:
            passed = passed and prev[0]
            detail = f"{prev[1]}; {detail}"
        _RESULTS[number] = (bool(passed), detail)
        return bool(passed)


@pytest.fixture(scope="session")
def criteria():
    return CriterionLog()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        passed, detail = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
