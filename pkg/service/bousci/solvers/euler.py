"""
Forced incompressible Euler on a time window.

    d_t v + div(v (x) v) + grad p = theta e_3,   div v = 0

solved pseudo-spectrally with Leray projection and RK4, forward and backward
from the initial time (the equation is time reversible).
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from bousci.core.errors import GridMismatchError
from bousci.fields.field import SYM_INDEX, SYM_PAIRS, Field, Rank, TimeSeriesField
from bousci.fields.field import to_physical, to_spectral
from bousci.fields.grid import Grid
from bousci.solvers.base_solver import SolveLog, SolverConfig, TimeIntegrator


logger = logging.getLogger(__name__)

DIVERGENCE_TOLERANCE = 1e-10


@dataclass
class EulerSolution:
    """Velocity, pressure and exact right-hand side sampled on the window."""

    v: TimeSeriesField
    p: TimeSeriesField
    dvdt: TimeSeriesField
    log: SolveLog


class ForcedEulerSolver(TimeIntegrator):
    """RK4 integrator for the projected forced Euler equation."""

    def __init__(
        self, grid: Grid, config: SolverConfig, forcing: Optional[TimeSeriesField] = None,
        name: str = 'euler',
    ):
        super().__init__(grid, config, name)
        if forcing is not None:
            grid.check_same(forcing.grid)
            if forcing.rank is not Rank.SCALAR:
                raise GridMismatchError("Euler forcing must be a scalar temperature series")
        self.forcing = forcing

    def _flux(self, state: np.ndarray) -> np.ndarray:
        """Coefficients of the 6 components of v (x) v."""
        pv = to_physical(self.grid, state, self.config.dealias)
        comps = np.stack([pv[i] * pv[j] for i, j in SYM_PAIRS])
        return to_spectral(self.grid, comps, self.config.dealias)

    def _theta(self, t: float) -> Optional[np.ndarray]:
        if self.forcing is None:
            return None
        return self.forcing.coeffs_at(t)[0]

    def _project(self, f: np.ndarray) -> np.ndarray:
        k = self.grid.k
        return f - k * np.sum(k * f, axis=0) / self.grid.k2_safe

    def rhs(self, t: float, state: np.ndarray) -> np.ndarray:
        ik = 1j * self.grid.k
        full = self._flux(state)[SYM_INDEX]
        f = -np.einsum('bxyz,abxyz->axyz', ik, full)
        theta = self._theta(t)
        if theta is not None:
            f[2] = f[2] + theta
        return self._project(f)

    def pressure(self, t: float, state: np.ndarray) -> np.ndarray:
        """Zero-mean p with Delta p = -div div(v (x) v) + d_3 theta."""
        k = self.grid.k
        full = self._flux(state)[SYM_INDEX]
        source = np.einsum('axyz,bxyz,abxyz->xyz', k, k, full)
        theta = self._theta(t)
        if theta is not None:
            source = source + 1j * k[2] * theta
        p = -source / self.grid.k2_safe
        return np.where(self.grid.zero_mode, 0.0, p)[None]

    def speed(self, t: float, state: np.ndarray) -> float:
        pv = to_physical(self.grid, state, dealias=False)
        return float(np.sqrt(np.max(np.sum(pv**2, axis=0))))

    def max_divergence(self, state: np.ndarray) -> float:
        return float(np.max(np.abs(np.sum(self.grid.k * state, axis=0))))


def solve_forced_euler(
    v_init: Field,
    forcing: Optional[TimeSeriesField],
    t_init: float,
    window: Tuple[float, float],
    dt_sample: float,
    config: SolverConfig,
) -> EulerSolution:
    """
    Solve forward and backward from ``t_init`` over ``window``.

    Args:
        v_init: Divergence-free velocity at t_init
        forcing: Temperature series covering the window (None for unforced)
        t_init: Initial time, a sample of the window grid
        window: (t_start, t_stop) with t_start <= t_init <= t_stop, both on the grid
        dt_sample: Spacing of the stored samples
        config: Solver settings

    Returns:
        EulerSolution sampled at t_start, t_start + dt_sample, ..., t_stop
    """
    grid = v_init.grid
    if v_init.rank is not Rank.VECTOR:
        raise GridMismatchError("solve_forced_euler expects a vector initial field")
    t_start, t_stop = window
    backward = int(round((t_init - t_start) / dt_sample))
    forward = int(round((t_stop - t_init) / dt_sample))
    if backward < 0 or forward < 0:
        raise GridMismatchError(f"t_init={t_init} outside window {window}")

    solver = ForcedEulerSolver(grid, config, forcing)
    solver.begin_log(t_start, t_stop)
    state0 = np.array(v_init.coeffs)
    if solver.max_divergence(state0) > DIVERGENCE_TOLERANCE:
        state0 = solver._project(state0)

    ahead = solver.integrate(state0, t_init, dt_sample, forward + 1, direction=1)
    behind = solver.integrate(state0, t_init, dt_sample, backward + 1, direction=-1)
    states: List[np.ndarray] = behind[:0:-1] + ahead
    times = t_start + dt_sample * np.arange(len(states))

    p_list, dv_list = [], []
    for t, state in zip(times, states):
        solver.log.record_residual('max_divergence', solver.max_divergence(state))
        p_list.append(solver.pressure(float(t), state))
        dv_list.append(solver.rhs(float(t), state))
    mean_drift = max(float(np.max(np.abs(s[:, 0, 0, 0] - state0[:, 0, 0, 0]))) for s in states)
    solver.log.record_residual('mean_drift', mean_drift)
    logger.info(
        f"Euler window [{t_start:.4g}, {t_stop:.4g}] from t={t_init:.4g}: "
        f"{solver.log.steps} steps, max CFL {solver.log.max_cfl:.3g}"
    )
    return EulerSolution(
        v=TimeSeriesField(grid, Rank.VECTOR, t_start, dt_sample, np.stack(states)),
        p=TimeSeriesField(grid, Rank.SCALAR, t_start, dt_sample, np.stack(p_list)),
        dvdt=TimeSeriesField(grid, Rank.VECTOR, t_start, dt_sample, np.stack(dv_list)),
        log=solver.log,
    )
