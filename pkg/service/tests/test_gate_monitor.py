"""
Tests for the gate monitor
"""

import math

import pytest

from bousci.core.errors import MonitorViolation
from bousci.core.gate_monitor import GateMonitor


def test_identity_checks(monitor):
    """Test identities pass within tolerance and fail otherwise."""
    assert monitor.check('div_free', 1e-13, 1e-12)
    assert not monitor.check('div_free', 1e-6, 1e-12)
    assert not monitor.check('nan_value', math.nan, 1.0)
    assert len(monitor.failed()) == 2
    assert monitor.latest('div_free').measured == pytest.approx(1e-6)
    assert monitor.latest('unknown') is None


def test_monitor_ratios(monitor):
    """Test estimate ratios and the vanishing right-hand side."""
    assert monitor.monitor('p1', 1.0, 4.0) == pytest.approx(0.25)
    assert monitor.monitor('p2', 3.0, 1.0) == pytest.approx(3.0)
    assert monitor.monitor('zero', 0.0, 0.0) == 0.0
    assert monitor.monitor('inf', 1.0, 0.0) == math.inf
    assert [r.name for r in monitor.failed('monitor')] == ['p2', 'inf']
    assert monitor.failed('identity') == []


def test_context_is_attached(monitor):
    """Test stage and step tags follow the context."""
    monitor.context(stage=2, step='glue')
    monitor.check('partition_of_unity', 0.0, 1e-12)
    monitor.report('margin', 0.4)
    monitor.context(stage=3, step='perturb')
    monitor.check('perturbation_divergence', 0.0, 1e-10)
    stage_two = monitor.to_list(stage=2)
    assert [r['name'] for r in stage_two] == ['partition_of_unity', 'margin']
    assert stage_two[0]['step'] == 'glue'
    assert stage_two[1]['kind'] == 'report'
    assert stage_two[1]['tolerance'] is None


def test_strict_mode():
    """Test strict mode raises on identities and on listed monitors only."""
    strict = GateMonitor(strict=True, strict_monitors=['p1_stress'])
    with pytest.raises(MonitorViolation) as excinfo:
        strict.check('glued_residual', 1.0, 1e-8)
    assert excinfo.value.name == 'glued_residual'
    assert strict.monitor('p2_velocity', 5.0, 1.0) == pytest.approx(5.0)
    with pytest.raises(MonitorViolation):
        strict.monitor('p1_stress', 5.0, 1.0)


def test_violation_stats_and_clear(monitor):
    """Test violation counts per kind and clearing."""
    monitor.check('a', 1.0, 0.0)
    monitor.monitor('b', 2.0, 1.0)
    monitor.monitor('c', 3.0, 1.0)
    assert monitor.get_violation_stats() == {'identity': 1, 'monitor': 2}
    monitor.clear()
    assert monitor.records == []
    assert monitor.get_violation_stats() == {}


def test_non_finite_serialization(monitor):
    """Test non-finite measurements serialize as strings."""
    monitor.monitor('inf', 1.0, 0.0)
    assert monitor.to_list()[0]['measured'] == 'inf'


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
