"""
Main entry point for the bousci laboratory.

Subcommands:
    validate  parameter schedule and constraint table
    mikado    build and verify the Mikado family
    run       full iteration to q_max
    study     scaling studies
    report    re-derive energy functionals and monitor tables from a run directory
"""

import argparse
import json
import logging
import re
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

from bousci import __version__
from bousci.core.config_manager import ConfigManager
from bousci.core.errors import BousciError, SchemeAbort, UnresolvedMollifierError
from bousci.core.gate_monitor import GateMonitor
from bousci.core.iteration_engine import IterationEngine, family_from_config
from bousci.core.params import validate_constraints
from bousci.diagnostics.energy import energy_functionals
from bousci.diagnostics.monitors import monitor_proposition
from bousci.diagnostics.report import (
    DiagnosticsReport,
    provenance,
    read_report,
    write_monitor_csv,
    write_report,
    write_series_csv,
)
from bousci.diagnostics.scaling import DEFAULT_SWEEPS, scaling_study
from bousci.diagnostics.snapshot import read_snapshot, sidecar_path, write_family
from bousci.mikado.family import verify_family
from bousci.scheme.stage import Stage
from bousci.solvers.base_solver import SolverConfig
from bousci.utils.logger import setup_logging


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_ABORT = 2

STAGE_DIR = re.compile(r"stage_(\d+)$")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='bousci', description='Convex-integration laboratory for 3D Boussinesq'
    )
    parser.add_argument(
        '--config', type=str, default='config.yaml', help='Path to configuration file'
    )
    parser.add_argument('--out', type=str, default=None, help='Output directory')
    parser.add_argument('--stages', type=int, default=None, help='Override problem.q_max')
    parser.add_argument('--grid', type=int, default=None, help='Override grid.n')
    parser.add_argument('--seed', type=int, default=None, help='Override mikado.seed')
    parser.add_argument(
        '--strict', action='store_true', help='Failed identity checks raise immediately'
    )
    parser.add_argument(
        '--strict-monitor', action='append', default=[], metavar='NAME',
        help='Monitor turned into a hard assertion under --strict (repeatable)',
    )
    parser.add_argument(
        '--log-level',
        type=str,
        default=None,
        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
        help='Logging level',
    )

    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('validate', help='Build the schedule and print the constraint table')
    sub.add_parser('mikado', help='Build and verify the Mikado family')
    sub.add_parser('run', help='Run the iteration to q_max')
    study = sub.add_parser('study', help='Run scaling studies')
    study.add_argument(
        '--kind', choices=sorted(DEFAULT_SWEEPS) + ['all'], default='all', help='Study to run'
    )
    report = sub.add_parser('report', help='Re-derive tables from a run directory')
    report.add_argument('run_dir', type=str, help='Directory written by "run"')
    return parser


def load_config(args: argparse.Namespace) -> ConfigManager:
    """Load the YAML configuration and apply command-line overrides."""
    config = ConfigManager.from_file(args.config)
    if args.stages is not None:
        config.set('problem.q_max', args.stages)
    if args.grid is not None:
        config.set('grid.n', args.grid)
    if args.seed is not None:
        config.set('mikado.seed', args.seed)
    if args.out is not None:
        config.set('io.out_dir', args.out)
    if args.log_level is not None:
        config.set('logging.level', args.log_level)
    return ConfigManager(config.to_dict())


def cmd_validate(config: ConfigManager) -> int:
    schedule = config.schedule()
    sobolev_s = float(config.get('scheme.sobolev_s'))
    reports = [validate_constraints(schedule, q, sobolev_s) for q in range(len(schedule))]
    rows = [dict(check.to_dict(), q=r.q) for r in reports for check in r.checks]
    table = pd.DataFrame(rows, columns=['q', 'name', 'lhs', 'rhs', 'margin', 'passed'])
    print(table.to_string(index=False))

    out = Path(config.get('io.out_dir'))
    out.mkdir(parents=True, exist_ok=True)
    with open(out / 'constraints.json', 'w') as f:
        json.dump(
            {
                'schedule': [sp.to_dict() for sp in schedule],
                'constraints': [r.to_dict() for r in reports],
            },
            f, indent=2, sort_keys=True,
        )
    failed = int((~table['passed'].astype(bool)).sum())
    logger.info(f"{len(table)} constraints evaluated, {failed} failing")
    return EXIT_OK


def cmd_mikado(config: ConfigManager, monitor: GateMonitor) -> int:
    family = family_from_config(config)
    measured = verify_family(family, seed=int(config.get('mikado.seed')), monitor=monitor)
    out = Path(config.get('io.out_dir'))
    write_family(out / 'family.bqci', family)
    report = DiagnosticsReport(provenance=provenance(config.content_hash(), family.seed))
    report.add_checks(monitor)
    report.set_outcome('verified', **measured)
    write_report(out / 'mikado.json', report)
    for name, value in measured.items():
        print(f"{name:28s} {value:.6e}")
    return EXIT_OK if not monitor.failed('identity') else EXIT_FAILURE


def cmd_run(config: ConfigManager, monitor: GateMonitor) -> int:
    engine = IterationEngine(config, monitor=monitor)
    engine.run()
    status = engine.get_status()
    logger.info(f"Run completed: {status['stats']}")
    return EXIT_OK


def cmd_study(config: ConfigManager, kind: str) -> int:
    kinds = sorted(DEFAULT_SWEEPS) if kind == 'all' else [kind]
    family = family_from_config(config) if 'mikado_decay' in kinds else None
    solver = SolverConfig.from_section(config.section('solver'))
    results = [scaling_study(k, family=family, config=solver) for k in kinds]
    report = DiagnosticsReport(
        provenance=provenance(config.content_hash(), config.get('mikado.seed')),
        studies=[r.to_dict() for r in results],
    )
    report.set_outcome('completed', passed=all(r.passed for r in results))
    write_report(Path(config.get('io.out_dir')) / 'studies.json', report)
    for r in results:
        print(f"{r.kind:24s} exponent {r.exponent:8.4f}  threshold {r.threshold:6.3f}  "
              f"{'pass' if r.passed else 'FAIL'}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILURE


def load_stage(directory: Path) -> Stage:
    """Rebuild a stage from its snapshots (no exact time derivative)."""
    match = STAGE_DIR.search(directory.name)
    if match is None:
        raise BousciError(f"{directory} is not a stage directory")
    series = {name: read_snapshot(directory / f"{name}.bqci") for name in ('v', 'p', 'R', 'theta')}
    with open(sidecar_path(directory / 'v.bqci')) as f:
        meta = json.load(f)
    return Stage(
        q=int(match.group(1)),
        metadata={'dealias': bool(meta.get('dealias', True)), 'dt': meta.get('dt')},
        **series,  # type: ignore[arg-type]
    )


def cmd_report(run_dir: str, out_dir: Optional[str] = None) -> int:
    run = Path(run_dir)
    run_config = ConfigManager.from_file(str(run / 'config.yaml'))
    schedule = run_config.schedule()
    previous = read_report(run / 'report.json') if (run / 'report.json').exists() else {}
    M = previous.get('provenance', {}).get('geometric_constant')
    if M is not None:
        schedule = schedule.with_M(float(M))

    directories = sorted(
        (d for d in run.iterdir() if d.is_dir() and STAGE_DIR.search(d.name)),
        key=lambda d: int(STAGE_DIR.search(d.name).group(1)),  # type: ignore[union-attr]
    )
    if not directories:
        raise BousciError(f"no stage directories under {run}")
    stages = [load_stage(d) for d in directories]
    report = DiagnosticsReport(provenance=provenance(run_config.content_hash(), source=str(run)))
    for i, stage in enumerate(stages):
        report.add_energy(stage.q, energy_functionals(stage, schedule.data))
        following = stages[i + 1] if i + 1 < len(stages) else None
        if stage.q < len(schedule):
            report.add_monitor_table(monitor_proposition(stage, schedule, following))
    report.set_outcome('rederived', stages=len(stages))

    out = Path(out_dir) if out_dir else run
    write_report(out / 'report_rederived.json', report)
    write_series_csv(out / 'series_rederived.csv', report)
    write_monitor_csv(out / 'monitors_rederived.csv', report)
    print(pd.DataFrame(report.monitors).to_string(index=False))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
    except BousciError as e:
        setup_logging(args.log_level or 'INFO')
        logger.error(f"Configuration error: {e}")
        return EXIT_FAILURE

    setup_logging(config.get('logging.level', 'INFO'), config.get('logging.file'))
    logger.info("=== bousci ===")
    logger.info(f"Version: {__version__}")
    logger.info(f"Command: {args.command}, config: {args.config}")

    monitor = GateMonitor(strict=args.strict, strict_monitors=args.strict_monitor)
    try:
        if args.command == 'validate':
            return cmd_validate(config)
        if args.command == 'mikado':
            return cmd_mikado(config, monitor)
        if args.command == 'run':
            return cmd_run(config, monitor)
        if args.command == 'study':
            return cmd_study(config, args.kind)
        return cmd_report(args.run_dir, args.out)
    except (SchemeAbort, UnresolvedMollifierError) as e:
        logger.error(f"Aborted at a declared gate: {e}")
        return EXIT_ABORT
    except Exception as e:
        logger.error(f"Fatal error: {e}", exc_info=True)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
