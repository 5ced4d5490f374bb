"""
Starting stage q = 0: a single shear mode, its explicit stress and the heat flow
of the initial temperature.
"""

import logging
import math
from typing import Optional

import numpy as np

from bousci.core.errors import ConfigurationError
from bousci.core.gate_monitor import GateMonitor
from bousci.core.params import TORUS_VOLUME, ParamSchedule
from bousci.fields.field import Rank, TimeSeriesField, transform_forward
from bousci.fields.grid import Grid
from bousci.scheme.stage import Stage, time_grid


logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-8


def start_slack(schedule: ParamSchedule) -> float:
    """delta_1 + delta_1 lambda_0^(-alpha): twice the energy gap left by v_0."""
    sp = schedule[0]
    return sp.delta_next * (1.0 + sp.lambda_q ** (-sp.alpha))


def shear_frequency(schedule: ParamSchedule) -> int:
    sp = schedule[0]
    return int(math.ceil(math.sqrt(sp.delta_q) * sp.lambda_q))


def _series(grid: Grid, rank: Rank, dt: float, samples: np.ndarray) -> TimeSeriesField:
    return TimeSeriesField(grid, rank, 0.0, dt, transform_forward(samples, grid.n))


def init_stage(
    schedule: ParamSchedule,
    grid: Grid,
    samples_per_tau: int,
    dealias: bool = True,
    monitor: Optional[GateMonitor] = None,
) -> Stage:
    """
    Build (v_0, p_0, R_0, theta_0) on t = 0, dt, ..., with dt = tau_0 / samples_per_tau.

    v_0 = A(t) sin(K x_2) e_1 with A = sqrt((2 e - c) / (8 pi^3)),
    R_0 = -A'(t) cos(K x_2) / K (e_1 (x) e_2 + e_2 (x) e_1),
    theta_0 = sum_m s_m e^{-m^2 t} sin(m x_3) and d_3 p_0 = theta_0.

    Raises:
        ConfigurationError: if 2 e(t) - c <= 0 somewhere or a mode is unresolved
    """
    data = schedule.data
    sp = schedule[0]
    dt = sp.tau_q / samples_per_tau
    times = time_grid(data.T, dt)
    cutoff = grid.dealias_fraction * grid.n / 2.0

    K = shear_frequency(schedule)
    if K >= cutoff:
        raise ConfigurationError(
            f"shear frequency {K} not resolved on grid {grid.n}",
            "ceil(delta_0^(1/2) lambda_0) < cutoff",
        )
    amplitudes = np.asarray(data.theta0_sine_amplitudes, dtype=float)
    if amplitudes.size >= cutoff:
        raise ConfigurationError(
            f"theta0 has {amplitudes.size} modes, grid resolves fewer", "theta0 modes < cutoff"
        )

    slack = start_slack(schedule)
    e = data.energy(times)
    de = data.energy_derivative(times)
    headroom = 2.0 * e - slack
    if float(np.min(headroom)) <= 0.0:
        raise ConfigurationError(
            f"2 e(t) - delta_1 (1 + lambda_0^-alpha) reaches {float(np.min(headroom)):.3g}",
            "2 e(t) - delta_1 - delta_1 lambda_0^(-alpha) > 0",
        )
    A = np.sqrt(headroom / TORUS_VOLUME)
    dA = de / np.sqrt(TORUS_VOLUME * headroom)

    x2, x3 = grid.x[1], grid.x[2]
    shear = np.sin(K * x2)
    nt = times.size

    v = np.zeros((nt, 3) + grid.shape)
    v[:, 0] = A[:, None, None, None] * shear
    dvdt = np.zeros_like(v)
    dvdt[:, 0] = dA[:, None, None, None] * shear
    R = np.zeros((nt, 6) + grid.shape)
    R[:, 1] = -dA[:, None, None, None] * np.cos(K * x2) / K

    theta = np.zeros((nt, 1) + grid.shape)
    p = np.zeros((nt, 1) + grid.shape)
    modes = np.arange(1, amplitudes.size + 1)
    for m, s_m in zip(modes, amplitudes):
        decay = (s_m * np.exp(-float(m * m) * times))[:, None, None, None]
        theta[:, 0] += decay * np.sin(m * x3)
        p[:, 0] -= decay * np.cos(m * x3) / m
    dissipation = 2.0 * math.pi**3 * np.sum(
        amplitudes[:, None] ** 2 * (1.0 - np.exp(-2.0 * modes[:, None] ** 2 * times[None])),
        axis=0,
    )

    stage = Stage(
        q=0,
        v=_series(grid, Rank.VECTOR, dt, v),
        p=_series(grid, Rank.SCALAR, dt, p),
        R=_series(grid, Rank.SYM_TENSOR, dt, R),
        theta=_series(grid, Rank.SCALAR, dt, theta),
        dvdt=_series(grid, Rank.VECTOR, dt, dvdt),
        dissipation=np.asarray(dissipation, dtype=float),
        dissipation_kind='analytic',
        metadata={
            'dealias': dealias,
            'shear_frequency': K,
            'slack': slack,
            'params': sp.to_dict(),
            'dt': dt,
        },
    )
    residual = float(np.max(stage.residual_norms()))
    stage.metadata['residual'] = residual
    if monitor is not None:
        monitor.context(stage=0, step='start')
        monitor.check('start_residual', residual, RESIDUAL_TOLERANCE)
        stage.check_invariants(monitor)
    logger.info(
        f"Starting stage: K={K}, dt={dt:.4g}, {nt} samples, residual {residual:.3e}"
    )
    return stage
