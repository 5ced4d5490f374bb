"""
Tests for energy functionals, monitor tables, the run report and scaling studies
"""

import math

import numpy as np
import pandas as pd
import pytest

from bousci.core.errors import GridMismatchError
from bousci.core.gate_monitor import GateMonitor
from bousci.diagnostics.energy import energy_functionals
from bousci.diagnostics.monitors import MonitorRow, levels, monitor_proposition
from bousci.diagnostics.report import (
    DiagnosticsReport,
    provenance,
    read_report,
    write_monitor_csv,
    write_report,
    write_series_csv,
)
from bousci.diagnostics.scaling import fit_exponent, scaling_study
from bousci.fields.grid import Grid
from bousci.scheme.starting import init_stage, start_slack


@pytest.fixture
def start(small_schedule, grid16):
    """Stage 0 of the small problem."""
    return init_stage(small_schedule, grid16, samples_per_tau=8)


# Energy functionals -----------------------------------------------------------

def test_start_energy_functionals(start, small_schedule):
    """Test E and M are conserved and the gap equals half the slack."""
    energies = energy_functionals(start, small_schedule.data)
    assert energies.E_drift < 1e-12
    assert energies.M_relative_drift < 1e-12
    np.testing.assert_allclose(energies.M, 0.5 * math.pi**3, rtol=1e-12)
    np.testing.assert_allclose(energies.gap, start_slack(small_schedule) / 2.0, rtol=1e-10)
    frame = energies.to_frame()
    assert list(frame.columns) == ['t', 'E', 'M', 'gap', 'kinetic']
    assert len(frame) == len(start)


def test_energy_without_stored_dissipation(start, small_schedule):
    """Test the trapezoid fallback stays close to the analytic dissipation."""
    start.dissipation = None
    energies = energy_functionals(start, small_schedule.data)
    assert energies.M_relative_drift < 1e-2
    assert energies.to_dict()['quadrature'] == 'trapezoid'


def test_energy_without_data(start):
    """Test the gap is taken against zero without problem data."""
    energies = energy_functionals(start)
    np.testing.assert_allclose(energies.gap, -energies.kinetic)


# Monitor tables ---------------------------------------------------------------

def test_monitor_row_ratio():
    """Test ratios, infinite ratios and report-only rows."""
    assert MonitorRow('a', 0, 1.0, 2.0).ratio == 0.5
    assert MonitorRow('b', 0, 1.0, 0.0).ratio == math.inf
    assert MonitorRow('c', 0, 0.0, 0.0).ratio == 0.0
    assert math.isnan(MonitorRow('d', 0, 1.0, math.nan).ratio)
    assert MonitorRow('e', 0, 3.0, 1.0, thresholded=False).to_dict()['passed'] is None
    assert MonitorRow('f', 0, 3.0, 1.0).to_dict()['passed'] is False


def test_levels_beyond_schedule(small_schedule):
    """Test the levels of the stage after q_max come from the last entry."""
    assert levels(small_schedule, 0)[0] == 2
    lam, delta, lam_next, _ = levels(small_schedule, 2)
    assert (lam, lam_next) == (4, 5)
    assert delta == pytest.approx(4 ** -0.4)
    with pytest.raises(IndexError):
        levels(small_schedule, 3)


def test_monitor_table_for_start(start, small_schedule):
    """Test the stage rows and their registration with the monitor."""
    monitor = GateMonitor()
    table = monitor_proposition(start, small_schedule.with_M(2.0), None, monitor)
    assert list(table.columns) == ['name', 'stage', 'lhs', 'rhs', 'ratio', 'passed']
    assert list(table['name']) == [
        'p1_stress', 'p2_velocity', 'p3_velocity_c1', 'p4_velocity_c2',
        'p5_gap_lower', 'p5_gap_upper', 'p8_temperature_energy',
    ]
    p4 = table.set_index('name').loc['p4_velocity_c2']
    assert p4['passed'] is None
    assert monitor.latest('p4_velocity_c2').kind == 'report'
    assert monitor.latest('p1_stress').kind == 'monitor'


def test_monitor_table_without_constant(start, small_schedule):
    """Test rows needing M are report-only until M is known."""
    monitor = GateMonitor()
    table = monitor_proposition(start, small_schedule, None, monitor)
    row = table.set_index('name').loc['p3_velocity_c1']
    assert math.isnan(row['rhs'])
    assert monitor.latest('p3_velocity_c1').kind == 'report'


def test_monitor_table_pair_rows(start, small_schedule):
    """Test the increment rows vanish between a stage and itself."""
    table = monitor_proposition(start, small_schedule.with_M(2.0), start)
    rows = table.set_index('name')
    assert rows.loc['p6_velocity_increment', 'lhs'] == 0.0
    assert rows.loc['p7_temperature_increment', 'lhs'] == 0.0


# Report -----------------------------------------------------------------------

def test_report_series_and_duplicates(start, small_schedule):
    """Test series registration and the merged frame."""
    report = DiagnosticsReport()
    report.add_energy(0, energy_functionals(start, small_schedule.data))
    assert set(report.scalars) == {'stage_0.E', 'stage_0.M', 'stage_0.gap'}
    with pytest.raises(KeyError):
        report.add_series('stage_0.E', start.times, np.zeros(len(start)))
    frame = report.series_frame()
    assert frame.shape == (len(start), 3)
    assert DiagnosticsReport().series_frame().empty


def test_report_json_round_trip(tmp_path, monitor):
    """Test the report serializes checks, non-finite values and provenance."""
    monitor.check('div_free', 1e-13, 1e-12)
    monitor.monitor('p1_stress', 1.0, 0.0)
    report = DiagnosticsReport(provenance=provenance('abc', seed=7))
    report.add_checks(monitor)
    report.add_checks(monitor)
    report.add_monitor_table(pd.DataFrame([{'name': 'p1_stress', 'ratio': math.inf}]))
    report.set_outcome('completed', stages=1)
    path = write_report(tmp_path / 'report.json', report)
    data = read_report(path)
    assert data['schema_version'] == 1
    assert len(data['checks']) == 2
    assert data['checks'][1]['measured'] == 'inf'
    assert data['monitors'][0]['ratio'] == 'inf'
    assert data['outcome'] == {'status': 'completed', 'stages': 1}
    assert data['provenance']['config_sha256'] == 'abc'
    assert data['provenance']['seed'] == 7


def test_csv_exports(tmp_path, start):
    """Test the series and monitor CSV files."""
    report = DiagnosticsReport()
    report.add_series('residual', start.times, start.residual_norms())
    report.add_monitor_table(pd.DataFrame([{'name': 'p1_stress', 'ratio': 0.5}]))
    series = pd.read_csv(write_series_csv(tmp_path / 'series.csv', report))
    monitors = pd.read_csv(write_monitor_csv(tmp_path / 'monitors.csv', report))
    assert list(series.columns) == ['t', 'residual']
    assert len(series) == len(start)
    assert monitors.loc[0, 'ratio'] == 0.5


# Scaling studies --------------------------------------------------------------

def test_fit_exponent():
    """Test the log-log slope of a power law."""
    assert fit_exponent([1.0, 2.0, 4.0], [3.0, 12.0, 48.0]) == pytest.approx(2.0)


def test_holder_study():
    """Test [sin(lam x)]_0.3 grows like lam^0.3 over lam = 4, 8, 16, 32 on 128^3."""
    result = scaling_study('holder')
    assert result.exponent == pytest.approx(0.3, abs=1e-6)
    assert result.passed
    assert result.to_dict()['sweep'] == [4.0, 8.0, 16.0, 32.0]
    assert np.all(np.diff(result.values) > 0.0)


def test_holder_study_refuses_unresolved_frequency():
    """Test lam = 32 lies outside the dealiased band of a 64^3 grid."""
    with pytest.raises(GridMismatchError):
        scaling_study('holder', grid=Grid(64))
    result = scaling_study('holder', sweep=(4, 8, 16), grid=Grid(64))
    assert result.passed


@pytest.mark.slow
def test_oscillatory_diffusion_study():
    """Test the forced response decays at least like lam^-0.9 over lam = 8, 16, 32."""
    result = scaling_study('oscillatory_diffusion')
    assert result.to_dict()['sweep'] == [8.0, 16.0, 32.0]
    assert result.exponent >= 0.9
    assert result.passed
    assert np.all(np.diff(result.values) < 0.0)


def test_commutator_study():
    """Test the quadratic commutator decays like l^2."""
    result = scaling_study('commutator', grid=Grid(64))
    assert result.exponent > 1.8
    assert np.all(np.diff(result.values) < 0.0)


def test_scaling_study_arguments():
    """Test unknown kinds, short sweeps and a missing family."""
    with pytest.raises(ValueError):
        scaling_study('unknown')
    with pytest.raises(ValueError):
        scaling_study('holder', sweep=(2, 4))
    with pytest.raises(ValueError):
        scaling_study('mikado_decay')


@pytest.mark.slow
def test_mikado_decay_study(family):
    """Test the profile coefficients decay faster than kappa^-4."""
    result = scaling_study('mikado_decay', family=family)
    assert result.passed
    assert result.threshold == 4.0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
