"""
Iteration Engine - Core orchestrator of a run.

Builds the schedule and the Mikado family, runs the stage iteration and
persists every stage, the report and a manifest of content hashes.
"""

import hashlib
import json
import logging
import platform
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

from bousci.core.config_manager import ConfigManager
from bousci.core.errors import BousciError, SchemeAbort, SolverAbort, UnresolvedMollifierError
from bousci.core.gate_monitor import GateMonitor
from bousci.core.params import (
    ConstraintReport,
    ParamSchedule,
    geometric_constant,
    validate_constraints,
)
from bousci.diagnostics.energy import energy_functionals
from bousci.diagnostics.monitors import monitor_proposition
from bousci.diagnostics.report import (
    DiagnosticsReport,
    provenance,
    write_monitor_csv,
    write_report,
    write_series_csv,
)
from bousci.diagnostics.snapshot import write_family, write_snapshot
from bousci.fields.grid import Grid
from bousci.mikado.family import MikadoFamily, build_family
from bousci.scheme.iteration import SchemeSettings, run_iteration
from bousci.scheme.stage import Stage
from bousci.scheme.starting import init_stage
from bousci.scheme.stripes import stripe_constant
from bousci.utils.metrics import StageTimer


logger = logging.getLogger(__name__)

STAGE_FIELDS = ('v', 'p', 'R', 'theta')


def family_from_config(config: ConfigManager) -> MikadoFamily:
    section = config.section('mikado')
    return build_family(
        radius=float(section['radius']),
        k_max=int(section['k_max']),
        seed=int(section['seed']),
        grid_n=int(section['grid_n']),
        bump_order=int(section['bump_order']),
        trials=int(section['placement_trials']),
    )


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


class IterationEngine:
    """
    Main engine that coordinates a run.

    Responsibilities:
    - Build and validate the parameter schedule
    - Build the Mikado family and complete the constant M
    - Run the starting stage and every iteration step
    - Persist stages, report and manifest, also when a gate aborts the run
    """

    def __init__(
        self,
        config: ConfigManager,
        out_dir: Optional[str] = None,
        monitor: Optional[GateMonitor] = None,
    ):
        self.config = config
        self.out_dir = Path(out_dir or config.get('io.out_dir', 'runs/default'))
        self.monitor = monitor or GateMonitor()
        self.timer = StageTimer()
        self.settings = SchemeSettings.from_config(config)
        self.grid = Grid(int(config.get('grid.n')), float(config.get('grid.dealias_fraction')))
        self.report = DiagnosticsReport(
            provenance=provenance(
                config.content_hash(),
                seed=config.get('mikado.seed'),
                machine=platform.machine(),
            )
        )

        self.schedule: Optional[ParamSchedule] = None
        self.family: Optional[MikadoFamily] = None
        self.constraints: List[ConstraintReport] = []
        self.stages: List[Stage] = []
        self.artifacts: Dict[str, str] = {}

        self.is_running = False
        self.stats = {
            'stages_completed': 0,
            'checks_recorded': 0,
            'checks_failed': 0,
            'constraint_failures': 0,
            'last_step_seconds': 0.0,
        }

        logger.info(f"IterationEngine initialized (grid {self.grid.n}^3, out {self.out_dir})")

    # setup

    def build_schedule(self) -> ParamSchedule:
        """Schedule for q = 0..q_max with every explicit constraint evaluated."""
        schedule = self.config.schedule()
        q_max = schedule.q_max
        self.constraints = [
            validate_constraints(schedule, q, self.settings.sobolev_s) for q in range(q_max + 1)
        ]
        for report in self.constraints:
            for failure in report.failures():
                logger.warning(
                    f"Constraint {failure.name} fails at q={report.q}: "
                    f"{failure.inequality} (margin {failure.margin:.3g})"
                )
            self.stats['constraint_failures'] += len(report.failures())
        self.schedule = schedule
        return schedule

    def build_family(self) -> MikadoFamily:
        self.family = family_from_config(self.config)
        return self.family

    def prepare(self) -> ParamSchedule:
        """Schedule, family and the geometric constant M."""
        schedule = self.schedule or self.build_schedule()
        family = self.family or self.build_family()
        c0 = stripe_constant(self.settings.stripe_shift)
        M = geometric_constant(schedule[0].M1, family.c_hat(), c0)
        self.schedule = schedule.with_M(M)
        self.report.provenance['geometric_constant'] = M
        self.report.provenance['stripe_constant'] = c0
        logger.info(f"Run prepared: M={M:.6g}, c0={c0:.6g}")
        return self.schedule

    # run

    def run(self) -> List[Stage]:
        """
        Run the iteration to q_max.

        Returns:
            Every stage built

        Raises:
            SchemeAbort, SolverAbort, UnresolvedMollifierError: after the partial
                artifacts and the failure record have been written
        """
        self.is_running = True
        try:
            schedule = self.prepare()
            with self.timer.measure('start'):
                stage = init_stage(
                    schedule, self.grid, self.settings.samples_per_tau,
                    self.settings.solver.dealias, self.monitor,
                )
            self._accept(stage)
            for q in range(schedule.q_max):
                with self.timer.measure('step'):
                    result = run_iteration(
                        stage, schedule, self.family, self.settings, self.monitor, self.timer
                    )
                self.stats['last_step_seconds'] = self.timer.get_stats('step')['max']
                self.report.solve_logs.extend(result.summary.pop('solve_logs'))
                self.report.stages.append({'q': q + 1, 'step': result.summary})
                table = monitor_proposition(stage, schedule, result.stage, self.monitor)
                self.report.add_monitor_table(table)
                stage = result.stage
                self._accept(stage)
            self.report.add_monitor_table(monitor_proposition(stage, schedule, None, self.monitor))
            self.report.set_outcome('completed', stages=len(self.stages))
            return self.stages
        except (SchemeAbort, SolverAbort, UnresolvedMollifierError) as e:
            logger.error(f"Run aborted at a declared gate: {e}", exc_info=True)
            self._record_failure(e)
            raise
        except BousciError as e:
            logger.error(f"Run failed: {e}", exc_info=True)
            self._record_failure(e)
            raise
        finally:
            self.is_running = False
            self.finalize()

    def _accept(self, stage: Stage) -> None:
        self.stages.append(stage)
        self.report.add_energy(stage.q, energy_functionals(stage, self.schedule.data))
        self.report.add_series(
            f"stage_{stage.q}.residual", stage.times, stage.residual_norms()
        )
        self.persist_stage(stage)
        self._update_stats()
        logger.info(f"Stage {stage.q} accepted ({len(stage)} samples)")

    def _record_failure(self, error: Exception) -> None:
        record: Dict[str, Any] = {
            'error': type(error).__name__,
            'message': str(error),
            'stage': self.stages[-1].q if self.stages else None,
            'time': datetime.now().isoformat(),
        }
        if isinstance(error, SchemeAbort):
            record['gate'] = error.gate
            record['trace'] = error.trace
        if isinstance(error, SolverAbort):
            record['diagnostics'] = error.diagnostics
        self.report.set_outcome('aborted', **record)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / 'failure.json'
        with open(path, 'w') as f:
            json.dump(self.report.to_dict()['outcome'], f, indent=2, sort_keys=True)
        self.artifacts['failure.json'] = sha256_file(path)

    # persistence

    def persist_stage(self, stage: Stage) -> Path:
        """stage_q/{v,p,R,theta}.bqci plus the stage report."""
        directory = self.out_dir / f"stage_{stage.q}"
        meta = {'q': stage.q, 'dt': stage.dt, 'dealias': stage.dealias}
        for name in STAGE_FIELDS:
            path = write_snapshot(directory / f"{name}.bqci", getattr(stage, name), meta)
            self.artifacts[str(path.relative_to(self.out_dir))] = sha256_file(path)
        stage_report = {
            'q': stage.q,
            'invariants': stage.invariant_measurements(),
            'metadata': {k: v for k, v in stage.metadata.items() if k != 'stripes'},
            'dissipation_kind': stage.dissipation_kind,
            'checks': self.monitor.to_list(stage=stage.q),
        }
        report = DiagnosticsReport(provenance=self.report.provenance, stages=[stage_report])
        write_report(directory / 'report.json', report)
        return directory

    def finalize(self) -> Path:
        """Write report, CSV exports, family, timings and manifest."""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.report.add_checks(self.monitor)
        self.report.provenance['constraints'] = [r.to_dict() for r in self.constraints]
        if self.family is not None:
            path = write_family(self.out_dir / 'family.bqci', self.family)
            self.artifacts['family.bqci'] = sha256_file(path)
        write_series_csv(self.out_dir / 'series.csv', self.report)
        write_monitor_csv(self.out_dir / 'monitors.csv', self.report)
        report_path = write_report(self.out_dir / 'report.json', self.report)
        with open(self.out_dir / 'timings.json', 'w') as f:
            json.dump(self.timer.summary(), f, indent=2, sort_keys=True)
        self.config.save_to_file(str(self.out_dir / 'config.yaml'))

        manifest = {
            'config_sha256': self.config.content_hash(),
            'outcome': self.report.outcome['status'],
            'parameters': [sp.to_dict() for sp in self.schedule] if self.schedule else [],
            'tolerances': {
                'residual_ratio': self.settings.residual_ratio_tol,
                'samples_per_tau': self.settings.samples_per_tau,
            },
            'files': dict(sorted(self.artifacts.items())),
            'report_sha256': sha256_file(report_path),
        }
        path = self.out_dir / 'manifest.json'
        with open(path, 'w') as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
        logger.info(f"Run artifacts written to {self.out_dir}")
        return path

    # status

    def _update_stats(self) -> None:
        self.stats['stages_completed'] = len(self.stages)
        self.stats['checks_recorded'] = len(self.monitor.records)
        self.stats['checks_failed'] = len(self.monitor.failed())

    def get_status(self) -> Dict[str, Any]:
        """Get engine status."""
        return {
            'is_running': self.is_running,
            'out_dir': str(self.out_dir),
            'q_max': self.schedule.q_max if self.schedule else None,
            'stats': self.stats.copy(),
            'violations': self.monitor.get_violation_stats(),
        }
