import pytest

_outcomes = {}
_details = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    if report.when == "call" or report.outcome != "passed":
        n = report.user_properties and dict(report.user_properties).get("criterion")
        if n:
            ok = report.outcome == "passed"
            _outcomes[n] = _outcomes.get(n, True) and ok
            _details.setdefault(n, []).extend(v for k, v in report.user_properties if k == "detail")


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    m = item.get_closest_marker("criterion")
    if m:
        item.user_properties.append(("criterion", m.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        extra = "; ".join(_details.get(n, []))
        terminalreporter.write_line(f"criterion {n}: {'PASS' if _outcomes[n] else 'FAIL'}"
                                    + (f"  ({extra})" if extra else ""))
