import numpy as np
import pytest

_CRITERIA = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion(request):
    """Record a verdict line for an acceptance criterion: ``criterion(k, ok, detail)``."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, 13):
        terminalreporter.write_line(_CRITERIA.get(k, f"criterion {k:>2}: FAIL  (no verdict: test errored or was deselected)"))
