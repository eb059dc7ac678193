import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    number, title = marker.args
    details = [v for k, v in item.user_properties if k == "detail"]
    item.config._criteria[number] = (title, rep.outcome, details)


def pytest_terminal_summary(terminalreporter, config):
    criteria = config._criteria
    if not criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(criteria):
        title, outcome, details = criteria[number]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")
        for d in details:
            for line in str(d).splitlines():
                terminalreporter.write_line(f"    {line}")
