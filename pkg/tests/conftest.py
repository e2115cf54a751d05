from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent

# criterion lines collected by test_acceptance.py, printed after the run
ACCEPTANCE_LINES = []


@pytest.fixture
def configs_dir():
    return ROOT / "configs"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
