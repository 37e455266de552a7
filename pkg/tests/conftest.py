import pytest

# Verdict lines accumulated by the acceptance tests; shown after the run so
# they survive output capture regardless of -s / -q / -v.
_GATE_LINES = []


@pytest.fixture
def gate_log():
    return _GATE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _GATE_LINES:
        terminalreporter.ensure_newline()
        terminalreporter.section("acceptance gate", sep="-")
        for line in _GATE_LINES:
            terminalreporter.write_line(line)
