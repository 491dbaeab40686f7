import pytest

from frequc import bundled_case_path, load_case
from helpers import tiny_shed_slice


@pytest.fixture(scope="session")
def bundled():
    return load_case(bundled_case_path())


@pytest.fixture
def tiny_shed_case(bundled):
    return tiny_shed_slice(bundled)


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
