"""Shared test configuration.

Prints a one-line PASS/FAIL verdict per acceptance criterion at the end of
any run that included tests from test_acceptance.py.
"""

from __future__ import annotations


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            if getattr(report, "when", None) != "call":
                continue
            if "test_acceptance.py" in report.nodeid:
                name = report.nodeid.split("::")[-1]
                verdicts[name] = "PASS" if status == "passed" else "FAIL"
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(verdicts):
        terminalreporter.write_line(f"{verdicts[name]}  {name}")
