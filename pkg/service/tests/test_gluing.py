"""
Tests for mollification, gluing and the temperature update on the small problem
"""

from dataclasses import replace

import numpy as np
import pytest

from bousci.core.errors import UnresolvedMollifierError
from bousci.fields.field import Rank
from bousci.fields.norms import sup_norm
from bousci.scheme.gluing import glue_stage, solve_local
from bousci.scheme.mollification import energy_difference, mollify_stage
from bousci.scheme.starting import init_stage
from bousci.scheme.stripes import build_partition
from bousci.scheme.temperature import initial_temperature, next_temperature
from bousci.solvers.base_solver import SolverConfig


@pytest.fixture
def start(small_schedule, grid16):
    """Stage 0 sampled eight times per tau_0."""
    return init_stage(small_schedule, grid16, samples_per_tau=8)


@pytest.fixture
def sp(small_schedule):
    """Parameters of stage 0."""
    return small_schedule[0]


@pytest.fixture
def mollified(start, sp):
    """Stage 0 mollified at l_0."""
    return mollify_stage(start, sp)


@pytest.fixture
def partition(start, sp):
    """Cutoffs over the stored span of stage 0."""
    return build_partition(sp.tau_q, float(start.times[-1]), start.dt)


def test_mollified_stage(start, sp, monitor):
    """Test the mollified stage keeps the residual and damps the velocity."""
    out = mollify_stage(start, sp, monitor)
    assert out.length == pytest.approx(sp.l)
    assert len(out.v) == len(start)
    assert out.v.rank is Rank.VECTOR
    assert monitor.latest('mollified_residual').passed
    assert float(np.max(out.residual_norms())) < 1e-10
    for s in (0, 14):
        assert 0.0 < sup_norm(out.v.snapshot(s)) < sup_norm(start.v.snapshot(s))
    assert np.all(energy_difference(start.v, out.v) > 0.0)
    assert monitor.latest('mollify_velocity') is not None


def test_mollifier_below_grid_step(start, sp):
    """Test a mollification length under the grid step is refused."""
    coarse = replace(sp, l=0.1)
    with pytest.raises(UnresolvedMollifierError):
        mollify_stage(start, coarse)


def test_local_solutions(mollified, partition):
    """Test one Euler solve per node over its window."""
    locals_ = solve_local(mollified, partition, SolverConfig())
    assert partition.m == 1
    assert [local.i for local in locals_] == [0, 1]
    assert locals_[0].first == 0
    assert len(locals_[0].solution.v) == 9
    assert len(locals_[1].solution.v) == 15
    assert locals_[0].covers(8) and not locals_[0].covers(9)
    node = locals_[1].index(8)
    np.testing.assert_allclose(
        locals_[1].solution.v.coeffs[node], mollified.v.coeffs[8], atol=1e-14
    )


def test_glued_stage(mollified, partition, sp, monitor):
    """Test plateau samples are exact and the glued residual vanishes."""
    glued = glue_stage(mollified, partition, SolverConfig(), sp, monitor)
    assert glued.interval_samples == [3, 4, 5]
    assert sorted(glued.plateau_samples + glued.interval_samples) == list(range(15))
    assert len(glued.solve_logs) == 2
    for s in glued.plateau_samples:
        assert sup_norm(glued.R.snapshot(s)) == 0.0
    assert monitor.latest('partition_of_unity').passed
    assert monitor.latest('glue_plateau_exact').passed
    assert monitor.latest('glued_residual').passed
    assert float(np.max(glued.residual_norms())) < 1e-8


def test_glued_shear_is_unchanged(mollified, partition, sp):
    """Test a stationary shear glues back to itself."""
    glued = glue_stage(mollified, partition, SolverConfig(), sp, max_workers=2)
    for s in range(len(glued.v)):
        assert sup_norm(glued.v.snapshot(s) - mollified.v.snapshot(s)) < 1e-10
    assert float(np.max(np.abs(energy_difference(glued.v, mollified.v)))) < 1e-8
    assert glued.theta is mollified.theta


def test_next_temperature_under_shear(start, small_data, sp, monitor):
    """Test a horizontal shear leaves the heat flow of theta^0 unchanged."""
    solution = next_temperature(start.v, small_data, SolverConfig(), sp, start.theta, monitor)
    assert len(solution.theta) == len(start)
    np.testing.assert_allclose(
        solution.theta.snapshot(0).values(),
        initial_temperature(start.grid, small_data).values(),
        atol=1e-14,
    )
    for s in (5, 14):
        assert sup_norm(solution.theta.snapshot(s) - start.theta.snapshot(s)) < 1e-5
    assert monitor.latest('maximum_principle_excess') is not None
    assert monitor.latest('temperature_difference') is not None


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
