"""
One step of the iteration: stage q -> stage q+1.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from bousci.core.config_manager import ConfigManager
from bousci.core.errors import ConfigurationError
from bousci.core.gate_monitor import GateMonitor
from bousci.core.params import ParamSchedule
from bousci.mikado.family import MikadoFamily
from bousci.scheme.gluing import GluedStage, glue_stage
from bousci.scheme.mollification import mollify_stage
from bousci.scheme.perturbation import (
    POTENTIALS,
    Perturbation,
    PerturbationScaffold,
    build_perturbation,
    build_scaffold,
    next_velocity,
)
from bousci.scheme.reynolds import ReynoldsResult, next_reynolds
from bousci.scheme.stage import Stage
from bousci.scheme.stripes import DEFAULT_SHIFT, build_partition, build_stripes
from bousci.scheme.temperature import next_temperature
from bousci.solvers.base_solver import SolverConfig
from bousci.utils.metrics import StageTimer


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SchemeSettings:
    """Knobs of the pipeline that are not problem data."""

    samples_per_tau: int = 12
    stripe_shift: float = DEFAULT_SHIFT
    sobolev_s: float = 0.6
    residual_ratio_tol: float = 1e-3
    max_workers: int = 1
    potential: str = 'continuum'
    solver: SolverConfig = field(default_factory=SolverConfig)

    @classmethod
    def from_config(cls, config: ConfigManager) -> "SchemeSettings":
        potential = str(config.get('scheme.potential', 'continuum'))
        if potential not in POTENTIALS:
            raise ConfigurationError(
                f"scheme.potential={potential!r} unknown", f"potential in {POTENTIALS}"
            )
        return cls(
            samples_per_tau=int(config.get('time.samples_per_tau', 12)),
            stripe_shift=float(config.get('scheme.stripe_shift', DEFAULT_SHIFT)),
            sobolev_s=float(config.get('scheme.sobolev_s', 0.6)),
            residual_ratio_tol=float(config.get('scheme.residual_ratio_tol', 1e-3)),
            max_workers=int(config.get('scheme.max_workers', 1)),
            potential=potential,
            solver=SolverConfig.from_section(config.section('solver')),
        )


@dataclass
class StepResult:
    """Stage q+1 plus the intermediate objects of the step."""

    stage: Stage
    glued: GluedStage
    scaffold: PerturbationScaffold
    perturbation: Perturbation
    reynolds: ReynoldsResult
    source: Stage
    summary: Dict[str, Any] = field(default_factory=dict)


def run_iteration(
    stage: Stage,
    schedule: ParamSchedule,
    family: MikadoFamily,
    settings: SchemeSettings,
    monitor: Optional[GateMonitor] = None,
    timer: Optional[StageTimer] = None,
) -> StepResult:
    """
    Mollify, glue, perturb, transport the temperature and build the new stress.

    Raises:
        SchemeAbort: at the energy-gap or admissibility gate
        SolverAbort: if a local solve fails
        UnresolvedMollifierError: if l is below the grid step
    """
    monitor = monitor or GateMonitor()
    timer = timer or StageTimer()
    q = stage.q
    sp = schedule[q]
    data = schedule.data
    dt = sp.tau_q / settings.samples_per_tau
    solver = settings.solver
    logger.info(f"Iteration {q} -> {q + 1}: lambda={sp.lambda_q}, l={sp.l:.4g}, tau={sp.tau_q:.4g}")

    source = stage.resample(dt)
    horizon = float(source.times[-1])

    with timer.measure('mollify'):
        mollified = mollify_stage(source, sp, monitor)
    with timer.measure('glue'):
        partition = build_partition(sp.tau_q, horizon, dt)
        stripes = build_stripes(partition, settings.stripe_shift)
        glued = glue_stage(mollified, partition, solver, sp, monitor, settings.max_workers)
    with timer.measure('scaffold'):
        scaffold = build_scaffold(glued, stripes, data, sp, family, solver, monitor)
    with timer.measure('perturb'):
        perturbation = build_perturbation(
            scaffold, family, sp.lambda_next, sp, monitor, settings.max_workers,
            settings.potential,
        )
        v_next, dvdt_next = next_velocity(glued, perturbation, data, sp, monitor)
    with timer.measure('temperature'):
        temperature = next_temperature(v_next, data, solver, sp, source.theta, monitor)
    with timer.measure('reynolds'):
        reynolds = next_reynolds(
            glued, scaffold, perturbation, source.theta, temperature.theta, sp,
            settings.sobolev_s, monitor,
        )

    new = Stage(
        q=q + 1,
        v=v_next,
        p=reynolds.p,
        R=reynolds.R,
        theta=temperature.theta,
        dvdt=dvdt_next,
        dissipation=temperature.dissipation,
        dissipation_kind='simpson',
        metadata={
            'dealias': solver.dealias,
            'dt': dt,
            'params': sp.to_dict(),
            'c0': stripes.c0,
            'stripes': stripes.to_dict(),
            'partition': partition.to_dict(),
        },
    )
    with timer.measure('verify'):
        monitor.context(stage=q + 1, step='verify')
        new.check_invariants(monitor)
        residual = float(np.max(new.residual_norms()))
        stress = float(np.max(new.stress_divergence_norms()))
        ratio = residual / stress if stress > 0.0 else residual
        monitor.check('stage_residual_ratio', ratio, settings.residual_ratio_tol)
    new.metadata['residual'] = residual
    new.metadata['residual_ratio'] = ratio

    summary = {
        'q': q,
        'dt': dt,
        'samples': len(new),
        'local_solves': len(glued.solve_logs),
        'admissibility_margin': scaffold.margin,
        'rtilde_deviation': scaffold.max_deviation,
        'backflow_deviation': scaffold.backflow_deviation,
        'corrector_identity_gap': perturbation.corrector_gap,
        'residual': residual,
        'residual_ratio': ratio,
        'solve_logs': glued.solve_logs + [temperature.log.to_dict()],
    }
    logger.info(f"Stage {q + 1} built: residual {residual:.3e} (ratio {ratio:.3e})")
    return StepResult(
        stage=new,
        glued=glued,
        scaffold=scaffold,
        perturbation=perturbation,
        reynolds=reynolds,
        source=source,
        summary=summary,
    )
