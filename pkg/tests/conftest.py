import numpy as np
import pytest

from nonholo.systems import get_system


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def sleigh():
    return get_system("chaplygin_sleigh")


@pytest.fixture(scope="session")
def snakeboard():
    return get_system("snakeboard")


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
