import numpy as np
import pytest

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = dict(rep.user_properties).get("detail", "")
        if hasattr(rep, "wasxfail"):
            status = "FAIL (expected, see decisions ledger)"
        elif rep.passed:
            status = "PASS"
        elif rep.skipped:
            status = "SKIPPED"
        else:
            status = "FAIL"
        _CRITERIA.append((marker.args[0], status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, status, detail in _CRITERIA:
        line = f"criterion {label}: {status}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)
