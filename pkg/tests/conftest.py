import pytest

# criterion number -> (title, outcomes of its tests)
_RESULTS: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result().criterion = (m.args[0], m.args[1])


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None or (report.when != "call" and report.outcome == "passed"):
        return
    n, title = crit
    _RESULTS.setdefault(n, (title, []))[1].append(report.outcome)


def _status(outcomes: list) -> str:
    if "failed" in outcomes:
        return "FAIL"
    if "passed" in outcomes:
        skipped = outcomes.count("skipped")
        return f"PASS ({skipped} conditional part skipped)" if skipped else "PASS"
    return "SKIP"


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        title, outcomes = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d} {_status(outcomes)}: {title}")
