"""
New Reynolds stress and pressure.

    I_1 = R(d_t w + div(v_bar (x) w + w (x) v_bar) + div(w (x) w - sum_i R_{q,i}))
    I_2 = R((theta_q - theta_{q+1}) e_3)
    I_3 = R((theta_l - theta_q) e_3)
    R_{q+1} = traceless(I_1 + I_2 + I_3),  p_{q+1} = p_bar - sum_i rho_{q,i} + rho_q

The transport terms are taken in divergence form, which equals
w . grad v_bar + v_bar . grad w for divergence-free fields and keeps the
discrete residual of the new stage at round-off.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from bousci.core.gate_monitor import GateMonitor
from bousci.core.params import StageParams
from bousci.fields.calculus import inverse_divergence, sobolev_constant, traceless
from bousci.fields.derivatives import div
from bousci.fields.field import Field, Rank, TimeSeriesField, sym_outer
from bousci.fields.norms import sobolev_norm, sup_norm
from bousci.scheme.gluing import GluedStage
from bousci.scheme.perturbation import Perturbation, PerturbationScaffold
from bousci.scheme.stage import momentum_residual, time_derivative


logger = logging.getLogger(__name__)

MEAN_TOLERANCE = 1e-8


@dataclass
class ReynoldsResult:
    """R_{q+1}, p_{q+1} and per-sample sizes of the three stress pieces."""

    R: TimeSeriesField
    p: TimeSeriesField
    I1: np.ndarray
    I2: np.ndarray
    I3: np.ndarray
    oracle_gap: np.ndarray


def _vertical(theta: Field) -> Field:
    coeffs = np.zeros((3,) + theta.grid.shape, dtype=complex)
    coeffs[2] = theta.coeffs[0]
    return Field(theta.grid, Rank.VECTOR, coeffs)


def _centered(f: Field) -> Field:
    c = np.array(f.coeffs)
    c[:, 0, 0, 0] = 0.0
    return f.with_coeffs(c)


def next_reynolds(
    glued: GluedStage,
    scaffold: PerturbationScaffold,
    perturbation: Perturbation,
    theta_prev: TimeSeriesField,
    theta_next: TimeSeriesField,
    sp: Optional[StageParams] = None,
    sobolev_s: float = 0.6,
    monitor: Optional[GateMonitor] = None,
) -> ReynoldsResult:
    """
    Assemble (R_{q+1}, p_{q+1}) sample by sample.

    Raises:
        NonZeroMeanError: if an inverse-divergence argument has mean beyond 1e-8
    """
    dealias = glued.dealias
    grid = glued.v.grid
    axis = grid.axis
    R_out: List[Field] = []
    p_out: List[Field] = []
    sizes = np.zeros((3, len(glued.v)))
    for s, t in enumerate(glued.v.times):
        v_bar = glued.v.snapshot(s)
        w = perturbation.w.snapshot(s)
        ctx = f"q={glued.q}, t={float(t):.6g}"

        flux = sym_outer(w, w, dealias) - scaffold.sum_stress(s, glued.R.snapshot(s))
        transport = div(sym_outer(v_bar, w, dealias)) * 2.0
        I1 = inverse_divergence(
            perturbation.dwdt.snapshot(s) + transport + div(flux), MEAN_TOLERANCE, f"I1 {ctx}"
        )
        I2 = inverse_divergence(
            _vertical(theta_prev.snapshot(s) - theta_next.snapshot(s)), MEAN_TOLERANCE,
            f"I2 {ctx}",
        )
        I3 = inverse_divergence(
            _vertical(glued.theta.snapshot(s) - theta_prev.snapshot(s)), MEAN_TOLERANCE,
            f"I3 {ctx}",
        )
        R_out.append(traceless(I1 + I2 + I3))
        sizes[:, s] = [sup_norm(I1), sup_norm(I2), sup_norm(I3)]

        pumping = scaffold.sum_rho(s, axis)
        rho_field = Field.scalar(grid, np.broadcast_to(pumping[None, None, :], grid.shape))
        p_out.append(_centered(glued.p.snapshot(s) - rho_field))

    t0, dt = glued.v.t0, glued.v.dt
    R = TimeSeriesField.from_fields(R_out, t0, dt)
    p = TimeSeriesField.from_fields(p_out, t0, dt)

    v_next = glued.v + perturbation.w
    oracle = direct_residual(v_next, p, R, theta_next, dealias)
    result = ReynoldsResult(R=R, p=p, I1=sizes[0], I2=sizes[1], I3=sizes[2], oracle_gap=oracle)

    if monitor is not None:
        monitor.context(stage=glued.q + 1, step='reynolds')
        monitor.report('I1_sup', float(np.max(sizes[0])))
        monitor.report('I3_sup', float(np.max(sizes[2])))
        c_s = sobolev_constant(sobolev_s, band=grid.n // 2)
        i2_bound = max(
            c_s * sobolev_norm(a - b, sobolev_s) for a, b in zip(theta_next, theta_prev)
        )
        monitor.monitor('I2_sobolev', float(np.max(sizes[1])), i2_bound)
        monitor.report('direct_residual_oracle', float(np.max(oracle)))
        if sp is not None:
            target = sp.delta_after * sp.lambda_next ** (-3.0 * sp.alpha)
            monitor.monitor('stress_size', max(sup_norm(f) for f in R), target)
    logger.info(
        f"Reynolds stress q={glued.q + 1}: |I1| {float(np.max(sizes[0])):.3g}, "
        f"|I2| {float(np.max(sizes[1])):.3g}, |I3| {float(np.max(sizes[2])):.3g}"
    )
    return result


def direct_residual(
    v: TimeSeriesField, p: TimeSeriesField, R: TimeSeriesField, theta: TimeSeriesField,
    dealias: bool = True,
) -> np.ndarray:
    """
    sup of div(R - R*) with R* = R(P_0[d_t v + div(v (x) v) + grad p - theta e_3]),
    d_t v taken by finite differences of the stored velocity.
    """
    dvdt = time_derivative(v)
    gaps = []
    for s in range(len(v)):
        defect = momentum_residual(
            v.snapshot(s), p.snapshot(s), Field.zeros(v.grid, Rank.SYM_TENSOR),
            theta.snapshot(s), dvdt.snapshot(s), dealias,
        )
        gaps.append(sup_norm(div(R.snapshot(s)) - _centered(defect)))
    return np.array(gaps)

