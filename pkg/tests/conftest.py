import numpy as np
import pytest

from apes.spectral import Grid
from apes.state import Params, make_initial_data


@pytest.fixture
def grid():
    return Grid(16, 16, 8, 1.0)


@pytest.fixture
def params():
    return Params(nx=16, ny=16, nz=8, dt=1e-3, t_final=0.01, f0=1.0, epsilon=0.01, monitor_stride=5)


@pytest.fixture
def state(params):
    return make_initial_data(params, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Acceptance verdicts, printed once at the end of the session.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
