"""
Tests for one iteration step and the iteration engine on the small problem
"""

import copy
import json

import numpy as np
import pytest

from bousci.core.config_manager import ConfigManager
from bousci.core.errors import ConfigurationError, UnresolvedMollifierError
from bousci.core.iteration_engine import IterationEngine
from bousci.diagnostics.snapshot import read_snapshot
from bousci.scheme.iteration import SchemeSettings, run_iteration
from bousci.scheme.starting import init_stage
from bousci.utils.metrics import StageTimer


SMALL_RUN = {
    'problem': {
        'T': 1.0,
        'q_max': 1,
        'frequencies': [2, 3, 4, 5],
        'e': {'constant': 1.0, 'cos_amplitudes': []},
        'theta0': {'sine_amplitudes': [0.5]},
    },
    'grid': {'n': 16},
    'time': {'samples_per_tau': 8},
}


@pytest.fixture
def small_config(tmp_path):
    """Configuration of the small problem writing under tmp_path."""
    config = ConfigManager(copy.deepcopy(SMALL_RUN))
    config.set('io.out_dir', str(tmp_path / 'run'))
    return config


def test_scheme_settings_from_config(small_config):
    """Test pipeline knobs are read from their sections."""
    small_config.set('scheme.max_workers', 2)
    settings = SchemeSettings.from_config(small_config)
    assert settings.samples_per_tau == 8
    assert settings.stripe_shift == pytest.approx(0.125)
    assert settings.max_workers == 2
    assert settings.solver.dealias
    assert settings.potential == 'continuum'
    assert SchemeSettings().samples_per_tau == 12
    small_config.set('scheme.potential', 'table')
    assert SchemeSettings.from_config(small_config).potential == 'table'
    small_config.set('scheme.potential', 'spline')
    with pytest.raises(ConfigurationError):
        SchemeSettings.from_config(small_config)


@pytest.mark.slow
def test_single_iteration(small_schedule, grid16, family, monitor):
    """Test stage 1 satisfies the Boussinesq-Reynolds system and its invariants."""
    schedule = small_schedule.with_M(2.0)
    start = init_stage(schedule, grid16, samples_per_tau=8, monitor=monitor)
    timer = StageTimer()
    result = run_iteration(
        start, schedule, family, SchemeSettings(samples_per_tau=8), monitor, timer
    )
    stage = result.stage
    assert stage.q == 1
    assert len(stage) == len(start)
    assert stage.dissipation_kind == 'simpson'
    assert stage.metadata['dt'] == pytest.approx(start.dt)
    assert result.source is start
    assert stage.metadata['residual'] < 1e-7
    for name in ('div_v', 'trace_R', 'mean_p', 'mean_theta'):
        assert monitor.latest(f"stage_1_{name}").passed
    assert monitor.latest('stage_residual_ratio').passed
    assert np.max(result.reynolds.oracle_gap) >= 0.0
    assert result.summary['local_solves'] == 2
    assert result.summary['admissibility_margin'] > 0.0
    assert set(timer.summary()) == {
        'mollify', 'glue', 'scaffold', 'perturb', 'temperature', 'reynolds', 'verify'
    }


@pytest.mark.slow
def test_engine_run_writes_artifacts(small_config, family, tmp_path):
    """Test a full run persists stages, report and manifest."""
    engine = IterationEngine(small_config)
    engine.family = family
    stages = engine.run()
    assert [stage.q for stage in stages] == [0, 1]

    out = tmp_path / 'run'
    for name in ('manifest.json', 'report.json', 'series.csv', 'monitors.csv',
                 'config.yaml', 'family.bqci', 'stage_0/v.bqci', 'stage_1/report.json'):
        assert (out / name).exists(), name
    manifest = json.loads((out / 'manifest.json').read_text())
    assert manifest['outcome'] == 'completed'
    assert manifest['config_sha256'] == small_config.content_hash()
    assert 'stage_1/theta.bqci' in manifest['files']
    theta = read_snapshot(out / 'stage_1' / 'theta.bqci')
    np.testing.assert_array_equal(theta.coeffs, stages[1].theta.coeffs)

    report = json.loads((out / 'report.json').read_text())
    assert report['outcome']['stages'] == 2
    assert report['provenance']['geometric_constant'] > 0.0
    assert {row['name'] for row in report['monitors']} >= {'p1_stress', 'p6_velocity_increment'}
    status = engine.get_status()
    assert not status['is_running']
    assert status['stats']['stages_completed'] == 2


@pytest.mark.slow
def test_repeated_run_is_reproducible(small_config, family, tmp_path):
    """Test two runs with the same seed write identical snapshots and reports."""
    outs = [tmp_path / 'first', tmp_path / 'second']
    for out in outs:
        engine = IterationEngine(ConfigManager(small_config.to_dict()), out_dir=str(out))
        engine.family = family
        engine.run()

    snapshots = sorted(p.relative_to(outs[0]) for p in outs[0].rglob('*.bqci'))
    assert len(snapshots) == 9
    assert snapshots == sorted(p.relative_to(outs[1]) for p in outs[1].rglob('*.bqci'))
    for name in snapshots:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name

    reports = []
    for out in outs:
        report = json.loads((out / 'report.json').read_text())
        report['provenance'].pop('created')
        reports.append(report)
    assert reports[0] == reports[1]
    assert 'timings' not in reports[0]['provenance']
    assert json.loads((outs[0] / 'timings.json').read_text())


@pytest.mark.slow
def test_engine_records_unresolved_mollifier(small_config, family, tmp_path):
    """Test a grid too coarse for l aborts with a failure record."""
    small_config.set('grid.n', 8)
    engine = IterationEngine(ConfigManager(small_config.to_dict()))
    engine.family = family
    with pytest.raises(UnresolvedMollifierError):
        engine.run()
    failure = json.loads((tmp_path / 'run' / 'failure.json').read_text())
    assert failure['status'] == 'aborted'
    assert failure['error'] == 'UnresolvedMollifierError'
    assert failure['stage'] == 0
    assert (tmp_path / 'run' / 'stage_0' / 'v.bqci').exists()


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
