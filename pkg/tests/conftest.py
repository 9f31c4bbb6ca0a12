import pytest

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when == "teardown":
        return
    num, title = mark.args
    prev = _outcomes.get(num, (title, "PASS", 0.0))
    status = prev[1]
    if rep.failed or (rep.when == "call" and rep.skipped):
        status = "FAIL" if rep.failed else "SKIP"
    _outcomes[num] = (title, status, prev[2] + rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_outcomes):
        title, status, secs = _outcomes[num]
        tr.write_line(f"criterion {num:>2} {status}  {title}  ({secs:.2f} s)")
