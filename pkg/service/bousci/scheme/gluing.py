"""
Gluing: exact local Euler solutions patched together with the partition chi_i.

On J_i the glued velocity is the local solution v_i itself; on I_i the two
neighbouring solutions are blended and the defect is written as the divergence
of the stress

    R_bar = chi_i' R(v_i - v_{i+1}) - chi_i (1 - chi_i) (v_i - v_{i+1}) (x)o (v_i - v_{i+1}).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from bousci.core.errors import GridMismatchError
from bousci.core.gate_monitor import GateMonitor
from bousci.core.params import StageParams
from bousci.fields.calculus import biot_savart, inverse_divergence, traceless_product
from bousci.fields.field import Field, Rank, TimeSeriesField, dot
from bousci.fields.norms import sup_norm
from bousci.scheme.mollification import MollifiedStage, energy_difference
from bousci.scheme.stage import momentum_residual
from bousci.scheme.stripes import GluePartition
from bousci.solvers.base_solver import SolverConfig
from bousci.solvers.euler import EulerSolution, solve_forced_euler


logger = logging.getLogger(__name__)

DIFFERENCE_MEAN_TOLERANCE = 1e-9
PARTITION_TOLERANCE = 1e-12
RESIDUAL_TOLERANCE = 1e-8


@dataclass
class LocalSolution:
    """Euler solution v_i started from v_l(t_i), stored on samples [first, first + len)."""

    i: int
    t_init: float
    first: int
    solution: EulerSolution

    def covers(self, s: int) -> bool:
        return self.first <= s < self.first + len(self.solution.v)

    def index(self, s: int) -> int:
        if not self.covers(s):
            raise GridMismatchError(f"sample {s} outside local window {self.i}")
        return s - self.first


@dataclass
class GluedStage:
    """(v_bar, p_bar, R_bar) with theta_l as forcing and the bookkeeping of the gluing."""

    q: int
    v: TimeSeriesField
    p: TimeSeriesField
    R: TimeSeriesField
    theta: TimeSeriesField
    dvdt: TimeSeriesField
    partition: GluePartition
    plateau_samples: List[int] = field(default_factory=list)
    interval_samples: List[int] = field(default_factory=list)
    solve_logs: List[Dict[str, Any]] = field(default_factory=list)
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


def _local_windows(
    partition: GluePartition, series: TimeSeriesField
) -> List[Tuple[int, int, int]]:
    """(node sample, first sample, last sample) of every local solve."""
    windows = []
    for i in range(partition.m + 1):
        t_lo, t_hi = partition.window(i)
        windows.append(
            (
                series.index_of(i * partition.tau),
                series.index_of(t_lo),
                series.index_of(t_hi),
            )
        )
    return windows


def solve_local(
    mollified: MollifiedStage,
    partition: GluePartition,
    config: SolverConfig,
    max_workers: int = 1,
) -> List[LocalSolution]:
    """Solve the forced Euler equation on every window [t_i - tau, t_i + tau]."""
    dt = mollified.v.dt
    windows = _local_windows(partition, mollified.v)

    def run(i: int) -> LocalSolution:
        node, first, last = windows[i]
        solution = solve_forced_euler(
            mollified.v.snapshot(node),
            mollified.theta,
            float(mollified.v.times[node]),
            (float(mollified.v.times[first]), float(mollified.v.times[last])),
            dt,
            config,
        )
        t_init = float(mollified.v.times[node])
        return LocalSolution(i=i, t_init=t_init, first=first, solution=solution)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(run, range(len(windows))))
    return [run(i) for i in range(len(windows))]


def _centered(f: Field) -> Field:
    c = np.array(f.coeffs)
    c[:, 0, 0, 0] = 0.0
    return f.with_coeffs(c)


def _blend(
    chi: float, dchi: float, a: LocalSolution, b: LocalSolution, s: int, dealias: bool, t: float,
) -> Tuple[Field, Field, Field, Field]:
    ia, ib = a.index(s), b.index(s)
    va, vb = a.solution.v.snapshot(ia), b.solution.v.snapshot(ib)
    d = va - vb
    stress = inverse_divergence(
        d, DIFFERENCE_MEAN_TOLERANCE, context=f"v_{a.i} - v_{b.i} at t={t:.6g}"
    ) * dchi - traceless_product(d, d, dealias) * (chi * (1.0 - chi))
    v = va * chi + vb * (1.0 - chi)
    p = _centered(
        a.solution.p.snapshot(ia) * chi
        + b.solution.p.snapshot(ib) * (1.0 - chi)
        + dot(d, d, dealias) * (chi * (1.0 - chi) / 3.0)
    )
    dvdt = (
        d * dchi
        + a.solution.dvdt.snapshot(ia) * chi
        + b.solution.dvdt.snapshot(ib) * (1.0 - chi)
    )
    return v, p, stress, dvdt


def glue_stage(
    mollified: MollifiedStage,
    partition: GluePartition,
    config: SolverConfig,
    sp: StageParams,
    monitor: Optional[GateMonitor] = None,
    max_workers: int = 1,
) -> GluedStage:
    """
    Glue the local solutions into (v_bar, p_bar, R_bar).

    Raises:
        NonZeroMeanError: if v_i - v_{i+1} has a mean beyond 1e-9
        SolverAbort: if a local solve fails
    """
    dealias = config.dealias
    locals_ = solve_local(mollified, partition, config, max_workers)
    grid = mollified.v.grid
    times = mollified.v.times

    v_out: List[Field] = []
    p_out: List[Field] = []
    R_out: List[Field] = []
    dv_out: List[Field] = []
    plateau: List[int] = []
    interval: List[int] = []
    partition_error = 0.0
    for s, t in enumerate(times):
        t = float(t)
        active = partition.active(t)
        partition_error = max(
            partition_error, abs(sum(float(partition.chi(i, t)) for i in active) - 1.0)
        )
        if len(active) == 1:
            local = locals_[active[0]]
            idx = local.index(s)
            v_out.append(local.solution.v.snapshot(idx))
            p_out.append(local.solution.p.snapshot(idx))
            dv_out.append(local.solution.dvdt.snapshot(idx))
            R_out.append(Field.zeros(grid, Rank.SYM_TENSOR))
            plateau.append(s)
        elif len(active) == 2:
            i = active[0]
            chi = float(partition.chi(i, t))
            dchi = float(partition.chi_derivative(i, t))
            v, p, R, dvdt = _blend(chi, dchi, locals_[i], locals_[i + 1], s, dealias, t)
            v_out.append(v)
            p_out.append(p)
            R_out.append(R)
            dv_out.append(dvdt)
            interval.append(s)
        else:
            raise GridMismatchError(f"partition has {len(active)} active cutoffs at t={t}")

    t0, dt = mollified.v.t0, mollified.v.dt
    glued = GluedStage(
        q=mollified.q,
        v=TimeSeriesField.from_fields(v_out, t0, dt),
        p=TimeSeriesField.from_fields(p_out, t0, dt),
        R=TimeSeriesField.from_fields(R_out, t0, dt),
        theta=mollified.theta,
        dvdt=TimeSeriesField.from_fields(dv_out, t0, dt),
        partition=partition,
        plateau_samples=plateau,
        interval_samples=interval,
        solve_logs=[local.solution.log.to_dict() for local in locals_],
        dealias=dealias,
    )

    if monitor is not None:
        _record(glued, mollified, locals_, sp, monitor, partition_error)
    logger.info(
        f"Glued stage {mollified.q}: {len(locals_)} local solves, "
        f"{len(plateau)} plateau and {len(interval)} blending samples"
    )
    return glued


def _record(
    glued: GluedStage,
    mollified: MollifiedStage,
    locals_: List[LocalSolution],
    sp: StageParams,
    monitor: GateMonitor,
    partition_error: float,
) -> None:
    monitor.context(stage=glued.q, step='glue')
    monitor.check('partition_of_unity', partition_error, PARTITION_TOLERANCE)
    plateau_gap = 0.0
    for s in glued.plateau_samples:
        i = glued.partition.active(float(glued.v.times[s]))[0]
        local = locals_[i]
        plateau_gap = max(
            plateau_gap,
            float(np.max(np.abs(glued.v.coeffs[s] - local.solution.v.coeffs[local.index(s)]))),
            float(np.max(np.abs(glued.R.coeffs[s]))),
        )
    monitor.check('glue_plateau_exact', plateau_gap, 0.0)
    monitor.check('glued_residual', float(np.max(glued.residual_norms())), RESIDUAL_TOLERANCE)

    z_max = 0.0
    for local in locals_:
        for idx in range(len(local.solution.v)):
            diff = local.solution.v.snapshot(idx) - mollified.v.snapshot(local.first + idx)
            z_max = max(z_max, sup_norm(biot_savart(diff)))
    monitor.monitor(
        'z_potential', z_max, sp.tau_q * sp.delta_next * sp.lambda_q ** (-sp.alpha)
    )
    energy_gap = float(np.max(np.abs(energy_difference(glued.v, mollified.v))))
    monitor.monitor('glue_energy', energy_gap, sp.delta_next * sp.l**sp.alpha)
