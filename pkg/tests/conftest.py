import numpy as np
import pytest

from blowuplab.nonlin import BUILTIN_NAMES, make_builtin
from blowuplab.resolvent import ResolventTable

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def tables():
    return {name: ResolventTable(make_builtin(name)) for name in BUILTIN_NAMES}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
