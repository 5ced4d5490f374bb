"""
Ratio table of the inductive estimates for a stage and its successor.

Each row is left side / right side. Rows whose constant is not fixed
(C(2) and the temperature constant) carry no threshold and are reported only.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from bousci.core.gate_monitor import GateMonitor
from bousci.core.params import ParamSchedule
from bousci.diagnostics.energy import accumulate, energy_functionals
from bousci.fields.field import Field
from bousci.fields.norms import VOLUME, holder_norm, sup_norm
from bousci.scheme.stage import Stage


M_DRIFT_TOLERANCE = 1e-5


@dataclass
class MonitorRow:
    name: str
    stage: int
    lhs: float
    rhs: float
    thresholded: bool = True

    @property
    def ratio(self) -> float:
        if not math.isfinite(self.rhs):
            return math.nan
        if self.rhs > 0.0:
            return self.lhs / self.rhs
        return 0.0 if self.lhs == 0.0 else math.inf

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'stage': self.stage,
            'lhs': self.lhs,
            'rhs': self.rhs,
            'ratio': self.ratio,
            'passed': (self.ratio <= 1.0) if self.thresholded and math.isfinite(self.rhs) else None,
        }


def levels(schedule: ParamSchedule, q: int) -> Tuple[int, float, float, float]:
    """(lambda_q, delta_q, lambda_{q+1}, delta_{q+1}) for any q <= q_max + 1."""
    if q < len(schedule):
        sp = schedule[q]
        return sp.lambda_q, sp.delta_q, sp.lambda_next, sp.delta_next
    sp = schedule[len(schedule) - 1]
    if q != sp.q + 1:
        raise IndexError(f"stage {q} is beyond the schedule")
    return sp.lambda_next, sp.delta_next, sp.lambda_after, sp.delta_after


def _c1_norm(f: Field) -> float:
    return float(holder_norm(f, 1.0))


def _common_span(a: Stage, b: Stage) -> Tuple[Stage, int]:
    """a resampled onto b's time step, and the number of shared samples."""
    a = a.resample(b.dt)
    return a, min(len(a), len(b))


def stage_rows(
    stage: Stage, schedule: ParamSchedule, theta0_half_energy: float
) -> List[MonitorRow]:
    q = stage.q
    lam, delta, _, delta_next = levels(schedule, q)
    sp = schedule[min(q, len(schedule) - 1)]
    alpha = sp.alpha
    M = sp.M if sp.M is not None else float('nan')
    energies = energy_functionals(stage, schedule.data)

    rows = [
        MonitorRow(
            'p1_stress', q, max(sup_norm(R) for R in stage.R), delta_next * lam ** (-3.0 * alpha)
        ),
        MonitorRow('p2_velocity', q, max(sup_norm(v) for v in stage.v), sp.C0 - math.sqrt(delta)),
        MonitorRow(
            'p3_velocity_c1', q, max(_c1_norm(v) for v in stage.v), M * math.sqrt(delta) * lam
        ),
        MonitorRow(
            'p4_velocity_c2', q,
            max(float(holder_norm(v, 2.0)) for v in stage.v),
            math.sqrt(delta) * lam**2,
            thresholded=False,
        ),
        MonitorRow(
            'p5_gap_lower', q, delta_next * lam ** (-alpha), float(np.min(energies.gap))
        ),
        MonitorRow('p5_gap_upper', q, float(np.max(energies.gap)), delta_next),
    ]
    if theta0_half_energy > 0.0:
        drift = float(np.max(np.abs(energies.M - theta0_half_energy))) / theta0_half_energy
        rows.append(MonitorRow('p8_temperature_energy', q, drift, M_DRIFT_TOLERANCE))
    return rows


def pair_rows(stage: Stage, following: Stage, schedule: ParamSchedule) -> List[MonitorRow]:
    q = stage.q
    _, _, lam_next, delta_next = levels(schedule, q)
    sp = schedule[min(q, len(schedule) - 1)]
    M = sp.M if sp.M is not None else float('nan')
    previous, count = _common_span(stage, following)

    increment = 0.0
    theta_gap = np.zeros(count)
    grad_gap = np.zeros(count)
    k2 = stage.grid.k2
    for s in range(count):
        d = following.v.snapshot(s) - previous.v.snapshot(s)
        increment = max(increment, sup_norm(d) + _c1_norm(d) / lam_next)
        dtheta = following.theta.coeffs[s, 0] - previous.theta.coeffs[s, 0]
        theta_gap[s] = VOLUME * float(np.sum(np.abs(dtheta) ** 2))
        grad_gap[s] = VOLUME * float(np.sum(k2 * np.abs(dtheta) ** 2))
    temperature = theta_gap + accumulate(following.times[:count], grad_gap)
    return [
        MonitorRow('p6_velocity_increment', q, increment, M * math.sqrt(delta_next)),
        MonitorRow(
            'p7_temperature_increment', q, float(np.max(temperature)), math.sqrt(delta_next),
            thresholded=False,
        ),
    ]


def monitor_proposition(
    stage: Stage,
    schedule: ParamSchedule,
    following: Optional[Stage] = None,
    monitor: Optional[GateMonitor] = None,
) -> pd.DataFrame:
    """
    Evaluate the estimate ratios for ``stage`` and, with ``following``, for the pair.

    Args:
        stage: Stage q
        schedule: Parameter schedule covering q
        following: Stage q+1, for the increment rows
        monitor: Optional GateMonitor; thresholded rows are recorded as monitors

    Returns:
        DataFrame with columns name, stage, lhs, rhs, ratio, passed
    """
    theta0_half = 0.5 * schedule.data.theta0_l2_squared()
    rows = stage_rows(stage, schedule, theta0_half)
    if following is not None:
        rows += pair_rows(stage, following, schedule)
    if monitor is not None:
        monitor.context(stage=stage.q, step='proposition')
        for row in rows:
            if row.thresholded and math.isfinite(row.rhs):
                monitor.monitor(row.name, row.lhs, row.rhs)
            else:
                monitor.report(row.name, row.ratio)
    return pd.DataFrame([row.to_dict() for row in rows])
