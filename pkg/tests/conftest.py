import sys

import numpy as np
import pytest

from dimer.dynamics import TwoBodyState, prepare_initial_state, project
from dimer.grid import GridSpec, build_grid
from dimer.hamiltonian import build_interferometer_h, diagonalize

SMALL = GridSpec(6.0, 41)
MEDIUM = GridSpec(9.0, 61)


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(SMALL)


@pytest.fixture(scope="session")
def medium_grid():
    return build_grid(MEDIUM)


@pytest.fixture(scope="session")
def coarse_dynamics(medium_grid):
    """Released dimer (g=-2, kappa=0.4, d=2) on a coarse grid: state, decomposition, projection."""
    state = prepare_initial_state(medium_grid, -2.0, 5.164, 2.0)
    dec = diagonalize(build_interferometer_h(medium_grid, -2.0, 0.4))
    return state, dec, project(state, dec)


def random_symmetric_state(grid, seed=0, complex_=True):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(grid.n, grid.n))
    if complex_:
        a = a + 1j * rng.normal(size=(grid.n, grid.n))
    a = a + a.T
    a /= np.sqrt(np.sum(np.abs(a) ** 2)) * grid.spacing
    return TwoBodyState.from_full(a, grid)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
