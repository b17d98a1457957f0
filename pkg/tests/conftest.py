"""Shared pytest plumbing.

Collects the one-line verdicts emitted by the end-to-end gate in
test_acceptance.py and replays them after the run, where pytest's
capture cannot hide them.
"""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
