"""Shared pytest wiring.

The acceptance tests record one verdict line each; replaying them after the
run keeps them visible even though pytest captures stdout of passing tests.
"""

_VERDICTS: list[str] = []


def record_verdict(line: str) -> None:
    _VERDICTS.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
