import re

_criteria: dict[int, bool] = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", report.nodeid)
    if m:
        _criteria[int(m.group(1))] = report.passed


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        verdict = "PASS" if _criteria[num] else "FAIL"
        terminalreporter.write_line(f"criterion {num}: {verdict}")
