import numpy as np
import pytest

from bcsgp.grids import MacroGrid, MicroGrid
from bcsgp.potentials import PotentialSpec
from bcsgp.state import build_pairing, pure_state_from_pairing
from bcsgp.twobody import solve_ground_state


@pytest.fixture(scope="session")
def gaussian_well():
    return PotentialSpec("gaussian_well", {"depth": 6.0, "width": 1.0})


@pytest.fixture(scope="session")
def ground_state(gaussian_well):
    return solve_ground_state(gaussian_well, MicroGrid(1, 40.0, 512))


@pytest.fixture(scope="session")
def small_grid():
    return MacroGrid(1, 8.0, 256, 0.25)


def gaussian_profile(x, width=1.0, center=0.0):
    return np.pi ** -0.25 / np.sqrt(width) * np.exp(-0.5 * ((x - center) / width) ** 2) + 0j


@pytest.fixture(scope="session")
def small_state(ground_state, small_grid):
    psi0 = gaussian_profile(small_grid.half_axis())
    alpha = build_pairing(psi0, ground_state, small_grid.h, small_grid)
    return pure_state_from_pairing(alpha, small_grid), psi0


ACCEPTANCE_LINES: list = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance measurement and return the verdict."""
    def record(label, value, threshold, passed, runtime=None):
        status = "PASS" if passed else "FAIL"
        timing = f" [{runtime:.1f} s]" if runtime is not None else ""
        line = f"{status} {label}: {value} (threshold {threshold}){timing}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
