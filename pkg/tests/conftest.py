import pytest

from helpers import load

ACCEPTANCE_LOG: list = []


@pytest.fixture
def network1():
    return load("network1")


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LOG


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion exercised by the test")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed and not rep.skipped):
        return
    entry = item.config._criteria.setdefault(mark.args[0], {"passed": [], "failed": [], "xfailed": []})
    if hasattr(rep, "wasxfail"):
        bucket = "failed" if rep.passed else "xfailed"
    elif rep.passed:
        bucket = "passed" if rep.when == "call" else None
    else:
        bucket = "failed"
    if bucket:
        entry[bucket].append(item.name)


def pytest_terminal_summary(terminalreporter, config):
    criteria = getattr(config, "_criteria", {})
    if not criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for line in ACCEPTANCE_LOG:
        tr.write_line(f"log: {line}")
    for n in sorted(criteria):
        entry = criteria[n]
        if entry["failed"]:
            status, note = "FAIL", "failing: " + ", ".join(entry["failed"])
        elif entry["xfailed"]:
            status = "FAIL"
            note = "literal target unattainable (" + ", ".join(entry["xfailed"]) + "); corrected checks pass: " + ", ".join(entry["passed"])
        else:
            status, note = "PASS", f"{len(entry['passed'])} checks"
        tr.write_line(f"criterion {n}: {status} - {note}")
