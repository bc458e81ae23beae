"""Shared pytest hooks: surface the acceptance PASS/FAIL lines.

Output captured during the acceptance tests is hidden for passing tests, so
test_acceptance registers its verdict lines here and they are echoed in the
terminal summary.
"""

ACCEPTANCE_REPORT = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_REPORT:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_REPORT:
            terminalreporter.write_line(line)
