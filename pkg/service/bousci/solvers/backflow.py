"""
Back flows: Phi_i with d_t Phi + (v . grad) Phi = 0 and Phi(t_i, x) = x.

The periodic displacement psi = Phi - x solves d_t psi + v . grad psi = -v.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from bousci.core.errors import GridMismatchError
from bousci.fields.derivatives import grad_vector_coeffs
from bousci.fields.field import Rank, TimeSeriesField, to_physical, to_spectral, transform_inverse
from bousci.fields.grid import Grid
from bousci.solvers.base_solver import SolveLog, SolverConfig, TimeIntegrator


logger = logging.getLogger(__name__)


@dataclass
class BackflowSolution:
    """Displacement psi_i sampled on the window plus accessors for grad Phi_i."""

    psi: TimeSeriesField
    t_init: float
    log: SolveLog

    @property
    def grid(self) -> Grid:
        return self.psi.grid

    def phase(self, s: int) -> np.ndarray:
        """Phi_i(t_s, x) = x + psi samples, shape (3, n, n, n)."""
        return self.grid.x + self.psi.snapshot(s).samples()

    def jacobian(self, s: int) -> np.ndarray:
        """grad Phi_i = Id + grad psi at sample s, indexed [a, b] = d_b Phi_a."""
        dpsi = transform_inverse(grad_vector_coeffs(self.psi.snapshot(s)))
        return dpsi + np.eye(3)[:, :, None, None, None]

    def determinant(self, s: int) -> np.ndarray:
        J = np.moveaxis(self.jacobian(s), (0, 1), (-2, -1))
        return np.linalg.det(J)

    def deviation(self, s: int) -> float:
        """sup_x ||grad Phi_i - Id||_F at sample s."""
        dpsi = self.jacobian(s) - np.eye(3)[:, :, None, None, None]
        return float(np.sqrt(np.max(np.sum(dpsi**2, axis=(0, 1)))))


class BackflowSolver(TimeIntegrator):
    """RK4 for the displacement of the inverse flow map."""

    def __init__(self, velocity: TimeSeriesField, config: SolverConfig, name: str = 'backflow'):
        if velocity.rank is not Rank.VECTOR:
            raise GridMismatchError("back flow needs a vector velocity series")
        super().__init__(velocity.grid, config, name)
        self.velocity = velocity
        samples = velocity.samples()
        self._sup = float(np.sqrt(np.max(np.sum(samples**2, axis=1))))

    def rhs(self, t: float, state: np.ndarray) -> np.ndarray:
        grid = self.grid
        dealias = self.config.dealias
        v = self.velocity.coeffs_at(t)
        pv = to_physical(grid, v, dealias)
        pd = to_physical(grid, 1j * grid.k[None, :] * state[:, None], dealias)
        advect = to_spectral(grid, np.einsum('bxyz,abxyz->axyz', pv, pd), dealias)
        return -advect - v

    def speed(self, t: float, state: np.ndarray) -> float:
        return self._sup


def solve_backflow(
    v_bar: TimeSeriesField,
    t_init: float,
    window: Tuple[float, float],
    config: SolverConfig,
) -> BackflowSolution:
    """
    Displacement of Phi_i forward and backward from ``t_init`` over ``window``.

    Args:
        v_bar: Velocity series whose span contains the window
        t_init: Time where Phi_i is the identity
        window: (t_start, t_stop), both on the sample grid of ``v_bar``
        config: Solver settings
    """
    dt = v_bar.dt
    t_start, t_stop = window
    if t_start < v_bar.t0 - 1e-12 or t_stop > v_bar.t1 + 1e-12:
        raise GridMismatchError(f"window {window} outside [{v_bar.t0}, {v_bar.t1}]")
    backward = int(round((t_init - t_start) / dt))
    forward = int(round((t_stop - t_init) / dt))
    if backward < 0 or forward < 0:
        raise GridMismatchError(f"t_init={t_init} outside window {window}")

    solver = BackflowSolver(v_bar, config)
    solver.begin_log(t_start, t_stop)
    state0 = np.zeros((3,) + v_bar.grid.shape, dtype=complex)
    ahead = solver.integrate(state0, t_init, dt, forward + 1, direction=1)
    behind = solver.integrate(state0, t_init, dt, backward + 1, direction=-1)
    states: List[np.ndarray] = behind[:0:-1] + ahead
    psi = TimeSeriesField(v_bar.grid, Rank.VECTOR, t_start, dt, np.stack(states))
    result = BackflowSolution(psi=psi, t_init=t_init, log=solver.log)
    worst = max(result.deviation(s) for s in range(len(psi)))
    solver.log.record_residual('max_jacobian_deviation', worst)
    logger.info(
        f"Back flow from t={t_init:.4g} on [{t_start:.4g}, {t_stop:.4g}]: "
        f"{solver.log.steps} steps, sup|grad Phi - Id| = {worst:.3g}"
    )
    return result
