import pytest

N_CRITERIA = 11


def pytest_configure(config):
    config._acceptance = {}


@pytest.fixture
def record_criterion(request):
    """Store (passed, detail) for an acceptance criterion number."""
    store = request.config._acceptance

    def record(n, passed, detail):
        store[n] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = getattr(config, "_acceptance", {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n in store:
            ok, detail = store[n]
            terminalreporter.write_line(f"CRITERION {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"CRITERION {n:2d}: FAIL  (not run or did not complete)")
