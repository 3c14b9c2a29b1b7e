import pytest

_RESULTS = {}


@pytest.fixture
def criterion():
    """Record ``(label, passed, detail)`` for the acceptance summary."""

    def record(number, passed, detail):
        _RESULTS[str(number)] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS, key=lambda k: [int(x) if x.isdigit() else x for x in k.split()]):
        passed, detail = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
