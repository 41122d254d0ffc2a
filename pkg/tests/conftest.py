import pytest

from ris_stogeo.params import default_config

# filled by test_acceptance; echoed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def cfg():
    return default_config()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
