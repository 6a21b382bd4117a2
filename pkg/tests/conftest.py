import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_AC_RESULTS: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, title): acceptance criterion id")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    cid, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        if hasattr(rep, "wasxfail"):
            status = "FAIL (known, see decisions ledger)" if rep.skipped else "PASS (unexpected)"
        else:
            status = "PASS" if rep.passed else "FAIL"
        _AC_RESULTS[cid] = (title, status, round(rep.duration, 2))


def pytest_terminal_summary(terminalreporter):
    if not _AC_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_AC_RESULTS):
        title, status, secs = _AC_RESULTS[cid]
        terminalreporter.write_line(f"{cid} {title}: {status} ({secs}s)")
