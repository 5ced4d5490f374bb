"""
Shared fixtures: a small resolvable problem on a 16^3 grid.

The frequency ladder 2, 3, 4, 5 keeps the stage-0 mollification length
(about 0.45) above the grid step 2 pi / 16.
"""

import pytest

from bousci.core.gate_monitor import GateMonitor
from bousci.core.params import ProblemData, build_schedule
from bousci.fields.grid import Grid
from bousci.mikado.family import build_family


SMALL_LADDER = (2, 3, 4, 5)


@pytest.fixture
def grid16():
    """16^3 grid with the 2/3 dealiasing rule."""
    return Grid(16)


@pytest.fixture
def small_data():
    """Constant energy and a single-mode initial temperature."""
    return ProblemData(
        beta=0.2,
        b=1.05,
        a=3.0,
        alpha=0.02,
        T=1.0,
        e_constant=1.0,
        theta0_sine_amplitudes=(0.5,),
    )


@pytest.fixture
def small_schedule(small_data):
    """One iteration step on the hand-picked ladder."""
    return build_schedule(small_data, 1, SMALL_LADDER)


@pytest.fixture
def monitor():
    """Non-strict gate monitor."""
    return GateMonitor()


@pytest.fixture(scope="session")
def family():
    """Mikado family shared across the session (built once)."""
    return build_family(
        radius=0.2, k_max=16, seed=7, grid_n=64, bump_order=6, trials=4096
    )
