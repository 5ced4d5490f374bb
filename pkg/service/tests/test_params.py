"""
Tests for problem data, the parameter schedule and the constraint report
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from bousci.core.errors import ConfigurationError
from bousci.core.params import (
    ProblemData,
    b_upper_bound,
    build_schedule,
    energy_bounds,
    frequency,
    geometric_constant,
    lattice_sum,
    stage_params,
    validate_constraints,
    validate_problem,
)


@pytest.fixture
def oscillating_data():
    """Default-like data with an oscillating energy profile."""
    return ProblemData(
        beta=0.2, b=1.05, a=3.0, alpha=0.02, T=0.2,
        e_cos_amplitudes=(0.05,), theta0_sine_amplitudes=(0.5,),
    )


def test_energy_profile(oscillating_data):
    """Test e(t) and its exact derivative."""
    assert oscillating_data.energy(0.0) == pytest.approx(1.05)
    assert oscillating_data.energy(0.1) == pytest.approx(0.95)
    t, h = 0.03, 1e-6
    numeric = (oscillating_data.energy(t + h) - oscillating_data.energy(t - h)) / (2 * h)
    assert oscillating_data.energy_derivative(t) == pytest.approx(numeric, rel=1e-6)


def test_initial_temperature(oscillating_data):
    """Test theta0 and its norms."""
    assert oscillating_data.theta0(math.pi / 2) == pytest.approx(0.5)
    assert oscillating_data.theta0_l2_squared() == pytest.approx(math.pi**3)
    assert oscillating_data.theta0_grad_l2() == pytest.approx(math.sqrt(math.pi**3))


def test_problem_data_is_frozen(small_data):
    """Test problem data cannot be mutated."""
    with pytest.raises(ValidationError):
        small_data.beta = 0.1


def test_b_upper_bound():
    """Test the closed form of the admissible base."""
    expected = (0.2 + math.sqrt(0.8 - 0.12)) / 0.8
    assert b_upper_bound(0.2) == pytest.approx(expected)


@pytest.mark.parametrize(
    "update, inequality",
    [
        ({'beta': 0.4}, "0 < beta < 1/3"),
        ({'b': 1.3}, "1 < b < (beta + sqrt(4 beta - 3 beta^2)) / (4 beta)"),
        ({'a': 1.5}, "a >= 2"),
        ({'alpha': 0.0}, "alpha > 0"),
        ({'T': -1.0}, "T > 0"),
        ({'e_constant': 0.01}, "min_t e(t) > 0"),
    ],
)
def test_validate_problem_names_inequality(oscillating_data, update, inequality):
    """Test each violated range is reported with its inequality."""
    data = oscillating_data.model_copy(update=update)
    with pytest.raises(ConfigurationError) as excinfo:
        validate_problem(data)
    assert excinfo.value.inequality == inequality


def test_frequency_ladder():
    """Test lambda_q = ceil(2 pi a^(b^q))."""
    assert frequency(3.0, 1.05, 0) == 19
    assert frequency(3.0, 1.05, 1) == 20


def test_stage_params_small_ladder(small_data):
    """Test derived parameters of the hand-checked ladder."""
    M1, m1 = energy_bounds(small_data)
    assert (M1, m1) == pytest.approx((1.0, 1.0))
    sp = stage_params(0, (2, 3, 4), small_data.beta, small_data.alpha, M1, m1)
    assert sp.delta_q == pytest.approx(2 ** -0.4)
    assert sp.l == pytest.approx(0.4514, abs=1e-3)
    assert sp.tau_q == pytest.approx(0.5563, abs=1e-3)
    assert sp.C0 == pytest.approx(math.sqrt(1.0 / (4.0 * math.pi**3)) + 1.0)
    assert sp.M is None
    with pytest.raises(ConfigurationError):
        stage_params(0, (3, 3, 4), small_data.beta, small_data.alpha, M1, m1)


def test_build_schedule_explicit_ladder(small_schedule):
    """Test the explicit ladder replaces the default frequencies."""
    assert len(small_schedule) == 2
    assert small_schedule.q_max == 1
    assert [sp.lambda_q for sp in small_schedule] == [2, 3]
    assert small_schedule[1].lambda_after == 5
    with_m = small_schedule.with_M(2.5)
    assert all(sp.M == 2.5 for sp in with_m)
    assert small_schedule[0].M is None


def test_build_schedule_default_ladder(oscillating_data):
    """Test the default ladder and the stage count."""
    schedule = build_schedule(oscillating_data, 2)
    assert [sp.lambda_q for sp in schedule] == [frequency(3.0, 1.05, q) for q in range(3)]
    assert schedule[0].M1 > 1.05


@pytest.mark.parametrize(
    "q_max, frequencies",
    [(-1, None), (1, (2, 3, 4)), (1, (2, 3, 3, 5))],
)
def test_build_schedule_rejects(small_data, q_max, frequencies):
    """Test negative q_max, short ladders and stalls are refused."""
    with pytest.raises(ConfigurationError):
        build_schedule(small_data, q_max, frequencies)


def test_lattice_sum():
    """Test the finite band sum and the divergence guard."""
    assert lattice_sum(4.0, band=2) == pytest.approx(6.0 + 12.0 / 4.0 + 8.0 / 9.0)
    assert lattice_sum(4.0) > lattice_sum(4.0, band=24)
    with pytest.raises(ValueError):
        lattice_sum(3.0)


def test_geometric_constant():
    """Test M is the larger of the two bounds."""
    base = math.sqrt(1.0 / (4.0 * math.pi**3))
    assert geometric_constant(1.0, 0.0, 1.0) == pytest.approx(base)
    assert geometric_constant(1.0, 10.0, 1.0) > base


def test_constraint_report_stage_zero(small_schedule):
    """Test the q = 0 report carries the start inequalities."""
    report = validate_constraints(small_schedule, 0)
    names = [c.name for c in report.checks]
    for name in ("start_gap_below_m1", "start_energy_positive", "start_shear_frequency",
                 "start_stress", "mollifier_lower", "i2_parameter"):
        assert name in names
    assert report['mollifier_lower'].passed
    assert report['mollifier_upper'].passed
    assert report['b_lower'].passed
    assert report['b_upper'].passed
    assert report['i2_exponent'].passed
    check = report['mollifier_upper']
    assert check.margin == pytest.approx(check.rhs - check.lhs)
    with pytest.raises(KeyError):
        report['unknown']
    data = report.to_dict()
    assert data['q'] == 0
    assert len(data['checks']) == len(report.checks)
    assert data['all_passed'] == (not report.failures())


def test_constraint_report_later_stage(small_schedule):
    """Test start inequalities are only evaluated at q = 0."""
    report = validate_constraints(small_schedule, 1)
    names = report.passed_names() + [c.name for c in report.failures()]
    assert "start_stress" not in names
    assert "gluing_time_step" in names
    assert np.isfinite(report['backflow_smallness'].lhs)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
