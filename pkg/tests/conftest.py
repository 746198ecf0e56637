import pytest

_RESULTS = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    num, title = marker.args
    details = [str(v) for k, v in item.user_properties if k == "detail"]
    _RESULTS.append((num, title, "PASS" if rep.passed else "FAIL", "; ".join(details)))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, status, detail in sorted(_RESULTS):
        line = f"criterion {num:>2} {title}: {status}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
