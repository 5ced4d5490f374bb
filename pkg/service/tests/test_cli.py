"""
Tests for the command-line entry point
"""

import json

import pytest
import yaml

from bousci.core.errors import BousciError
from bousci.main import EXIT_ABORT, EXIT_FAILURE, EXIT_OK, build_parser, load_stage, main


SMALL_CONFIG = {
    'problem': {
        'T': 1.0,
        'q_max': 1,
        'frequencies': [2, 3, 4, 5],
        'e': {'constant': 1.0, 'cos_amplitudes': []},
        'theta0': {'sine_amplitudes': [0.5]},
    },
    'grid': {'n': 16},
    'time': {'samples_per_tau': 8},
    'logging': {'level': 'WARNING'},
}


@pytest.fixture
def config_file(tmp_path):
    """Small-problem configuration on disk."""
    path = tmp_path / 'config.yaml'
    path.write_text(yaml.safe_dump(SMALL_CONFIG))
    return path


def test_parser_requires_command():
    """Test a subcommand is mandatory."""
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
    args = build_parser().parse_args(['--stages', '2', 'study', '--kind', 'holder'])
    assert args.stages == 2
    assert args.kind == 'holder'


def test_validate_writes_constraint_table(tmp_path, config_file, capsys):
    """Test validate prints the table and stores the schedule."""
    out = tmp_path / 'out'
    code = main(['--config', str(config_file), '--out', str(out), 'validate'])
    assert code == EXIT_OK
    data = json.loads((out / 'constraints.json').read_text())
    assert [sp['lambda_q'] for sp in data['schedule']] == [2, 3]
    assert [r['q'] for r in data['constraints']] == [0, 1]
    assert 'mollifier_lower' in capsys.readouterr().out


def test_validate_with_missing_config(tmp_path):
    """Test a missing file falls back to the default configuration."""
    code = main(['--config', str(tmp_path / 'absent.yaml'), '--out', str(tmp_path), 'validate'])
    assert code == EXIT_OK
    data = json.loads((tmp_path / 'constraints.json').read_text())
    assert data['schedule'][0]['lambda_q'] == 19


def test_invalid_override_is_a_failure(config_file, tmp_path):
    """Test a grid size that is not a power of two is refused."""
    code = main(['--config', str(config_file), '--out', str(tmp_path), '--grid', '12', 'validate'])
    assert code == EXIT_FAILURE


def test_holder_study(config_file, tmp_path):
    """Test a single scaling study and its report."""
    code = main(['--config', str(config_file), '--out', str(tmp_path), 'study', '--kind', 'holder'])
    assert code == EXIT_OK
    data = json.loads((tmp_path / 'studies.json').read_text())
    assert data['studies'][0]['kind'] == 'holder'
    assert data['outcome'] == {'status': 'completed', 'passed': True}


def test_report_without_stages(tmp_path, config_file):
    """Test report on a directory without stages fails cleanly."""
    run = tmp_path / 'empty'
    run.mkdir()
    (run / 'config.yaml').write_text(config_file.read_text())
    assert main(['--config', str(config_file), 'report', str(run)]) == EXIT_FAILURE


def test_load_stage_rejects_other_directories(tmp_path):
    """Test only stage_<q> directories are read."""
    with pytest.raises(BousciError):
        load_stage(tmp_path)


@pytest.mark.slow
def test_run_and_report(tmp_path, config_file):
    """Test the small run end to end and the re-derived report."""
    out = tmp_path / 'run'
    assert main(['--config', str(config_file), '--out', str(out), 'run']) == EXIT_OK
    assert (out / 'manifest.json').exists()
    assert main(['--config', str(config_file), 'report', str(out)]) == EXIT_OK
    data = json.loads((out / 'report_rederived.json').read_text())
    assert data['outcome'] == {'status': 'rederived', 'stages': 2}
    assert (out / 'monitors_rederived.csv').exists()


@pytest.mark.slow
def test_run_abort_exit_code(tmp_path, config_file):
    """Test an unresolved mollification length exits with the abort code."""
    out = tmp_path / 'coarse'
    code = main(['--config', str(config_file), '--out', str(out), '--grid', '8', 'run'])
    assert code == EXIT_ABORT
    failure = json.loads((out / 'failure.json').read_text())
    assert failure['error'] == 'UnresolvedMollifierError'
    assert (out / 'manifest.json').exists()


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
