"""
Stage container (v_q, p_q, R_q, theta_q) and the Boussinesq-Reynolds residual.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from bousci.core.errors import GridMismatchError
from bousci.core.gate_monitor import GateMonitor
from bousci.fields.derivatives import div, div_outer, grad, trace
from bousci.fields.field import Field, Rank, TimeSeriesField, transform_inverse
from bousci.fields.grid import Grid
from bousci.fields.norms import sup_norm


logger = logging.getLogger(__name__)

DIVERGENCE_TOLERANCE = 1e-9
TRACE_TOLERANCE = 1e-10
MEAN_TOLERANCE = 1e-12


def time_grid(T: float, dt: float) -> np.ndarray:
    """Samples k dt for k = 0..floor(T / dt)."""
    count = int(math.floor(T / dt + 1e-9)) + 1
    return dt * np.arange(count)


def momentum_residual(
    v: Field, p: Field, R: Field, theta: Field, dvdt: Field, dealias: bool = True
) -> Field:
    """d_t v + div(v (x) v) + grad p - theta e_3 - div R."""
    res = dvdt + div_outer(v, dealias) + grad(p) - div(R)
    coeffs = np.array(res.coeffs)
    coeffs[2] = coeffs[2] - theta.coeffs[0]
    return res.with_coeffs(coeffs)


def time_derivative(series: TimeSeriesField) -> TimeSeriesField:
    """Second-order finite differences of the stored samples."""
    if len(series) < 3:
        raise GridMismatchError("time derivative needs at least three samples")
    coeffs = np.gradient(series.coeffs, series.dt, axis=0, edge_order=2)
    return TimeSeriesField(series.grid, series.rank, series.t0, series.dt, coeffs)


@dataclass
class Stage:
    """
    Solution of the Boussinesq-Reynolds system at level q on a uniform time grid.

    ``dvdt`` holds an exact time derivative of v when one is known;
    ``dissipation`` the accumulated integral of ||grad theta||^2 per sample.
    """

    q: int
    v: TimeSeriesField
    p: TimeSeriesField
    R: TimeSeriesField
    theta: TimeSeriesField
    dvdt: Optional[TimeSeriesField] = None
    dissipation: Optional[np.ndarray] = None
    dissipation_kind: Optional[str] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        expected = {'v': Rank.VECTOR, 'p': Rank.SCALAR, 'R': Rank.SYM_TENSOR, 'theta': Rank.SCALAR}
        for name, rank in expected.items():
            series = getattr(self, name)
            if series.rank is not rank:
                raise GridMismatchError(f"stage field {name} must have rank {rank.name}")
            self.v.grid.check_same(series.grid)
            if len(series) != len(self.v) or series.dt != self.v.dt:
                raise GridMismatchError(f"stage field {name} is on another time grid")

    @property
    def grid(self) -> Grid:
        return self.v.grid

    @property
    def dt(self) -> float:
        return self.v.dt

    @property
    def times(self) -> np.ndarray:
        return self.v.times

    def __len__(self) -> int:
        return len(self.v)

    @property
    def dealias(self) -> bool:
        return bool(self.metadata.get('dealias', True))

    def velocity_derivative(self) -> TimeSeriesField:
        return self.dvdt if self.dvdt is not None else time_derivative(self.v)

    def residual(self, s: int) -> Field:
        dvdt = self.velocity_derivative()
        return momentum_residual(
            self.v.snapshot(s), self.p.snapshot(s), self.R.snapshot(s),
            self.theta.snapshot(s), dvdt.snapshot(s), self.dealias,
        )

    def residual_norms(self) -> np.ndarray:
        """sup-norm of the momentum residual at every sample."""
        return np.array([sup_norm(self.residual(s)) for s in range(len(self))])

    def stress_divergence_norms(self) -> np.ndarray:
        return np.array([sup_norm(div(self.R.snapshot(s))) for s in range(len(self))])

    def invariant_measurements(self) -> Dict[str, float]:
        """Largest violation of each structural invariant over all samples."""
        grid = self.grid
        div_v = float(np.max(np.abs(np.sum(grid.k * self.v.coeffs, axis=1))))
        tr = max(
            float(np.max(np.abs(transform_inverse(trace(R).coeffs)))) for R in self.R
        )
        return {
            'div_v': div_v,
            'trace_R': tr,
            'mean_p': float(np.max(np.abs(self.p.coeffs[:, 0, 0, 0, 0]))),
            'mean_theta': float(np.max(np.abs(self.theta.coeffs[:, 0, 0, 0, 0]))),
        }

    def check_invariants(self, monitor: GateMonitor) -> bool:
        """Record the stage invariants; True if all hold."""
        tolerances = {
            'div_v': DIVERGENCE_TOLERANCE,
            'trace_R': TRACE_TOLERANCE,
            'mean_p': MEAN_TOLERANCE,
            'mean_theta': MEAN_TOLERANCE,
        }
        measured = self.invariant_measurements()
        ok = True
        for name, value in measured.items():
            ok &= monitor.check(f"stage_{self.q}_{name}", value, tolerances[name])
        return ok

    def resample(self, dt: float) -> "Stage":
        """Cubic resampling of every series onto spacing dt over the same span."""
        if dt == self.dt:
            return self
        v = self.v.resample(dt)
        dissipation = None
        if self.dissipation is not None:
            spline = CubicSpline(self.times, self.dissipation)
            dissipation = np.asarray(spline(v.times))
        logger.info(f"Stage {self.q} resampled from dt={self.dt:.4g} to dt={dt:.4g}")
        return replace(
            self,
            v=v,
            p=self.p.resample(dt),
            R=self.R.resample(dt),
            theta=self.theta.resample(dt),
            dvdt=None if self.dvdt is None else self.dvdt.resample(dt),
            dissipation=dissipation,
            metadata={**self.metadata, 'resampled_from_dt': self.dt},
        )

    def fields(self) -> Dict[str, TimeSeriesField]:
        out = {'v': self.v, 'p': self.p, 'R': self.R, 'theta': self.theta}
        if self.dvdt is not None:
            out['dvdt'] = self.dvdt
        return out

    def summary(self) -> List[str]:
        return [f"{name}: {series!r}" for name, series in self.fields().items()]
