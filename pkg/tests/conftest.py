import numpy as np
import pytest

from acceptance_log import ACCEPTANCE_LINES
from xanes_emc.synthetic import default_truth, synthesize


@pytest.fixture(scope="session")
def truth():
    return default_truth()


@pytest.fixture(scope="session")
def truth_data(truth):
    return synthesize(truth)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
