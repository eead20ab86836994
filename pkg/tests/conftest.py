"""Shared pytest hooks.

The acceptance tests register one [PASS]/[FAIL] line per criterion here;
printing them from the terminal-summary hook keeps them visible in the
final report even under pytest's output capture.
"""

acceptance_lines: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
