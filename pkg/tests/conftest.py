"""Shared test fixtures: the acceptance-summary reporter.

Acceptance tests record one PASS/FAIL line each; the hook replays them in a
dedicated section at the end of the run so the verdicts are visible even for
passing tests.
"""

import pytest


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def verdict_line(request):
    """Record (and echo) one acceptance verdict line."""

    def record(line: str) -> None:
        request.config._acceptance_lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
