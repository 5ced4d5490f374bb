"""
Space mollification of a stage at the scale l.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from bousci.core.gate_monitor import GateMonitor
from bousci.core.params import StageParams
from bousci.fields.calculus import mollify, traceless_product
from bousci.fields.field import Field, TimeSeriesField, dot
from bousci.fields.norms import VOLUME, sup_norm
from bousci.scheme.stage import Stage, momentum_residual


logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-8


@dataclass
class MollifiedStage:
    """(v_l, p_l, R_l, theta_l) plus the exact time derivative of v_l."""

    q: int
    length: float
    v: TimeSeriesField
    p: TimeSeriesField
    R: TimeSeriesField
    theta: TimeSeriesField
    dvdt: TimeSeriesField
    dealias: bool = True

    def residual_norms(self) -> np.ndarray:
        return np.array(
            [
                sup_norm(
                    momentum_residual(
                        self.v.snapshot(s), self.p.snapshot(s), self.R.snapshot(s),
                        self.theta.snapshot(s), self.dvdt.snapshot(s), self.dealias,
                    )
                )
                for s in range(len(self.v))
            ]
        )


def _centered(f: Field) -> Field:
    c = np.array(f.coeffs)
    c[:, 0, 0, 0] = 0.0
    return f.with_coeffs(c)


def mollify_stage(
    stage: Stage, sp: StageParams, monitor: Optional[GateMonitor] = None
) -> MollifiedStage:
    """
    v_l = v_q * phi_l, theta_l = theta_q * phi_l,
    R_l = R_q * phi_l - (v_q (x)o v_q) * phi_l + v_l (x)o v_l,
    p_l = p_q * phi_l + (|v_q|^2 * phi_l - |v_l|^2) / 3 (mean removed).

    Raises:
        UnresolvedMollifierError: if l does not exceed the grid step
    """
    l = sp.l
    dealias = stage.dealias
    dvdt = stage.velocity_derivative()
    v_l: List[Field] = []
    p_l: List[Field] = []
    R_l: List[Field] = []
    theta_l: List[Field] = []
    dv_l: List[Field] = []
    for s in range(len(stage)):
        v = stage.v.snapshot(s)
        vl = mollify(v, l)
        speed2 = dot(v, v, dealias)
        speed2_l = dot(vl, vl, dealias)
        v_l.append(vl)
        theta_l.append(mollify(stage.theta.snapshot(s), l))
        dv_l.append(mollify(dvdt.snapshot(s), l))
        R_l.append(
            mollify(stage.R.snapshot(s), l)
            - mollify(traceless_product(v, v, dealias), l)
            + traceless_product(vl, vl, dealias)
        )
        p_l.append(
            _centered(mollify(stage.p.snapshot(s), l) + (mollify(speed2, l) - speed2_l) / 3.0)
        )

    t0, dt = stage.v.t0, stage.dt
    out = MollifiedStage(
        q=stage.q,
        length=l,
        v=TimeSeriesField.from_fields(v_l, t0, dt),
        p=TimeSeriesField.from_fields(p_l, t0, dt),
        R=TimeSeriesField.from_fields(R_l, t0, dt),
        theta=TimeSeriesField.from_fields(theta_l, t0, dt),
        dvdt=TimeSeriesField.from_fields(dv_l, t0, dt),
        dealias=dealias,
    )

    if monitor is not None:
        monitor.context(stage=stage.q, step='mollify')
        source = max(float(np.max(stage.residual_norms())), RESIDUAL_TOLERANCE)
        monitor.check('mollified_residual', float(np.max(out.residual_norms())), 10.0 * source)
        gap = max(sup_norm(vl - v) for vl, v in zip(out.v, stage.v))
        monitor.monitor(
            'mollify_velocity', gap, np.sqrt(sp.delta_next) * sp.lambda_q ** (-sp.alpha)
        )
        energy_gap = float(np.max(np.abs(energy_difference(stage.v, out.v))))
        monitor.monitor('mollify_energy', energy_gap, sp.delta_next * l**sp.alpha)
    logger.info(f"Mollified stage {stage.q} at l={l:.4g} ({len(stage)} samples)")
    return out


def energy_difference(a: TimeSeriesField, b: TimeSeriesField) -> np.ndarray:
    """int |a|^2 - int |b|^2 at every sample."""
    ea = VOLUME * np.sum(np.abs(a.coeffs) ** 2, axis=(1, 2, 3, 4))
    eb = VOLUME * np.sum(np.abs(b.coeffs) ** 2, axis=(1, 2, 3, 4))
    return ea - eb
