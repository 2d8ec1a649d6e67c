"""Shared pytest wiring: echo the acceptance verdict lines after the run.

The acceptance tests print one PASS/FAIL line each as they execute (visible
with -s); this hook repeats the collected lines through the terminal
reporter so they also survive default output capture.
"""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    for name in ("tests.test_acceptance", "test_acceptance"):
        mod = sys.modules.get(name)
        if mod is not None and getattr(mod, "REPORT_LINES", None):
            terminalreporter.section("acceptance criteria")
            for line in mod.REPORT_LINES:
                terminalreporter.line(line)
            break
