import warnings

import numpy as np
import pytest

# numba warns about an old TBB on import; it falls back to another threading layer
warnings.filterwarnings("ignore", message=".*TBB.*")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# --- acceptance reporting ------------------------------------------------------

_criteria: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    n = mark.args[0]
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.failed:
        msg = str(rep.longrepr.reprcrash.message) if hasattr(rep.longrepr, "reprcrash") else "error"
        _criteria[n] = ("FAIL", detail or msg.splitlines()[0][:160])
    elif rep.when == "call":
        _criteria.setdefault(n, ("PASS", detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        status, detail = _criteria[n]
        terminalreporter.write_line(f"CRITERION {n}: {status}" + (f"  ({detail})" if detail else ""))
