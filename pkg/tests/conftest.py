import re

from helpers import ACCEPTANCE_DETAILS

_outcomes = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes[n] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        label = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[_outcomes[n]]
        detail = ACCEPTANCE_DETAILS.get(n, "")
        terminalreporter.write_line(f"criterion {n:2d}: {label}  {detail}")
