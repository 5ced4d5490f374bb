"""
Tests for the windowed time integrators
"""

import numpy as np
import pytest

from bousci.core.errors import (
    BlowUpError,
    CFLViolationError,
    ConfigurationError,
    GridMismatchError,
)
from bousci.fields.field import Field, Rank, TimeSeriesField
from bousci.fields.grid import Grid
from bousci.fields.norms import l2_norm, mean, series_max, sup_norm
from bousci.solvers.backflow import solve_backflow
from bousci.solvers.base_solver import SolverConfig
from bousci.solvers.euler import solve_forced_euler
from bousci.solvers.transport import (
    heat_mode_response,
    phi_functions,
    solve_oscillatory_diffusion_test,
    solve_transport,
    solve_transport_diffusion,
)


@pytest.fixture
def config():
    """Default solver settings."""
    return SolverConfig()


def constant_series(field: Field, t0: float, dt: float, count: int) -> TimeSeriesField:
    """The same field at ``count`` uniform times."""
    return TimeSeriesField.from_fields([field] * count, t0, dt)


def shear(grid, amplitude: float = 0.3) -> Field:
    """A sin(x2) e1, a stationary Euler flow."""
    comps = np.zeros((3,) + grid.shape)
    comps[0] = amplitude * np.sin(grid.x[1])
    return Field.vector(grid, comps)


def test_solver_config_validation():
    """Test configuration ranges are enforced."""
    assert SolverConfig().dt_cfl_factor == 0.5
    with pytest.raises(ConfigurationError):
        SolverConfig.from_section({'dt_cfl_factor': 1.5})
    with pytest.raises(ConfigurationError):
        SolverConfig.from_section({'blowup_factor': 1.0})
    config = SolverConfig.from_section({'max_dt': 0.01, 'dealias': False})
    assert config.max_dt == 0.01
    assert not config.dealias


def test_euler_shear_is_stationary(grid16, config):
    """Test a shear flow stays put forward and backward in time."""
    v0 = shear(grid16)
    solution = solve_forced_euler(v0, None, 0.2, (0.0, 0.4), 0.1, config)
    assert len(solution.v) == 5
    assert solution.v.t0 == pytest.approx(0.0)
    for s in range(5):
        assert sup_norm(solution.v.snapshot(s) - v0) < 1e-12
        assert sup_norm(solution.dvdt.snapshot(s)) < 1e-12
        assert sup_norm(solution.p.snapshot(s)) < 1e-12
    assert solution.log.residuals['max_divergence'] < 1e-12
    assert solution.log.residuals['mean_drift'] < 1e-14


def taylor_green(grid, amplitude: float = 1.0) -> Field:
    """(sin x1 cos x2 cos x3, -cos x1 sin x2 cos x3, 0), divergence-free and not stationary."""
    x1, x2, x3 = grid.x
    comps = np.zeros((3,) + grid.shape)
    comps[0] = amplitude * np.sin(x1) * np.cos(x2) * np.cos(x3)
    comps[1] = -amplitude * np.cos(x1) * np.sin(x2) * np.cos(x3)
    return Field.vector(grid, comps)


def test_euler_forward_backward_round_trip(grid16):
    """Test solving forward to t = 0.2 and back from there returns the Taylor-Green field."""
    config = SolverConfig(max_dt=0.01)
    v0 = taylor_green(grid16)
    forward = solve_forced_euler(v0, None, 0.0, (0.0, 0.2), 0.05, config)
    v_end = forward.v.snapshot(len(forward.v) - 1)
    assert sup_norm(v_end - v0) > 1e-3
    backward = solve_forced_euler(v_end, None, 0.2, (0.0, 0.2), 0.05, config)
    returned = backward.v.snapshot(0)
    assert l2_norm(returned - v0) / l2_norm(v0) < 1e-7
    for s in range(len(forward.v)):
        gap = l2_norm(backward.v.snapshot(s) - forward.v.snapshot(s))
        assert gap / l2_norm(v0) < 1e-7


@pytest.mark.slow
def test_mikado_field_is_stationary_euler_flow(family):
    """Test W(Id) on 64^3 does not move under the unforced Euler equation over 0.1."""
    grid = Grid(family.grid_n)
    W = family.evaluate_W(np.eye(3), grid)
    config = SolverConfig(dealias=False)
    solution = solve_forced_euler(W, None, 0.0, (0.0, 0.1), 0.05, config)
    for s in range(len(solution.v)):
        assert sup_norm(solution.v.snapshot(s) - W) < 1e-8


def test_maximum_principle_under_shear_advection(grid16, config):
    """Test sup|theta(t)| never exceeds sup|theta_init| under a shear velocity."""
    v = constant_series(shear(grid16, 0.8), 0.0, 0.05, 11)
    theta0 = Field.scalar(grid16, np.sin(grid16.x[2]) + 0.5 * np.cos(grid16.x[0]))
    solution = solve_transport_diffusion(v, theta0, (0.0, 0.5), 0.05, config)
    initial = sup_norm(theta0)
    assert initial == pytest.approx(1.5)
    assert series_max(solution.theta, sup_norm) <= initial + 1e-8
    assert solution.log.residuals['max_principle_excess'] <= 1e-8
    final = solution.theta.snapshot(10)
    assert sup_norm(final) < initial


def test_euler_buoyancy_forcing(grid16, config):
    """Test theta = sin(x1) accelerates v3 = (t - t_init) sin(x1)."""
    theta = Field.scalar(grid16, np.sin(grid16.x[0]))
    forcing = constant_series(theta, 0.0, 0.1, 5)
    solution = solve_forced_euler(
        Field.zeros(grid16, Rank.VECTOR), forcing, 0.1, (0.0, 0.4), 0.1, config
    )
    for s, t in enumerate(solution.v.times):
        expected = np.zeros((3,) + grid16.shape)
        expected[2] = (t - 0.1) * np.sin(grid16.x[0])
        np.testing.assert_allclose(solution.v.snapshot(s).samples(), expected, atol=1e-12)


def test_euler_rejects_bad_window(grid16, config):
    """Test t_init must lie in the window."""
    with pytest.raises(GridMismatchError):
        solve_forced_euler(shear(grid16), None, 0.5, (0.0, 0.4), 0.1, config)


def test_pure_heat_flow(grid16, config):
    """Test theta = e^{-t} sin(x3) and conservation of the energy functional."""
    theta0 = Field.scalar(grid16, np.sin(grid16.x[2]))
    solution = solve_transport_diffusion(None, theta0, (0.0, 0.5), 0.05, config)
    assert len(solution.theta) == 11
    final = solution.theta.snapshot(10).values()
    np.testing.assert_allclose(final, np.exp(-0.5) * np.sin(grid16.x[2]), atol=1e-10)
    assert solution.log.residuals['energy_drift'] < 1e-6
    assert solution.dissipation[0] == 0.0
    assert np.all(np.diff(solution.dissipation) > 0.0)
    assert solution.log.residuals['max_principle_excess'] == 0.0


def test_transport_by_uniform_velocity(grid16, config):
    """Test f(t, x) = sin(x1 - t) under v = e1 and conservation of the mean."""
    comps = np.zeros((3,) + grid16.shape)
    comps[0] = 1.0
    v = constant_series(Field.vector(grid16, comps), 0.0, 0.05, 11)
    f0 = Field.scalar(grid16, 0.25 + np.sin(grid16.x[0]))
    solution = solve_transport(v, f0, (0.0, 0.5), 0.05, config)
    final = solution.theta.snapshot(10)
    np.testing.assert_allclose(
        final.values(), 0.25 + np.sin(grid16.x[0] - 0.5), atol=1e-6
    )
    assert mean(final) == pytest.approx(0.25, abs=1e-14)
    assert 'energy_drift' not in solution.log.residuals


def test_oscillatory_diffusion_matches_heat_mode(grid16, config):
    """Test the zero-data response to cos(4 x3) matches the closed form to 1e-8."""
    g = Field.scalar(grid16, np.ones(grid16.shape))
    solution = solve_oscillatory_diffusion_test(None, g, 4, (0, 0, 1), (0.0, 0.5), 0.05, config)
    times = solution.theta.times
    amplitude = np.real(solution.theta.coeffs[:, 0, 0, 0, 4])
    expected = 0.5 * heat_mode_response(4, times)
    np.testing.assert_allclose(amplitude, expected, atol=1e-8)
    assert abs(amplitude[0]) == 0.0
    other = np.abs(solution.theta.coeffs[-1]).copy()
    other[0, 0, 0, 4] = 0.0
    other[0, 0, 0, -4] = 0.0
    assert np.max(other) < 1e-14


def test_constant_forcing_integrated_exactly(grid16):
    """Test a large step reproduces (1 - e^{-|k|^2 t}) / |k|^2 for a constant source."""
    coarse = SolverConfig(max_dt=0.25)
    source = np.zeros((1,) + grid16.shape, dtype=complex)
    source[0, 1, 2, 0] = 1.0
    source[0, -1, -2, 0] = 1.0
    source[0, 0, 0, 0] = 0.5
    solution = solve_transport_diffusion(
        None, Field.zeros(grid16), (0.0, 1.0), 0.25, coarse, forcing=lambda t: source
    )
    times = solution.theta.times
    np.testing.assert_allclose(
        np.real(solution.theta.coeffs[:, 0, 1, 2, 0]),
        (1.0 - np.exp(-5.0 * times)) / 5.0,
        atol=1e-12,
    )
    np.testing.assert_allclose(
        np.real(solution.theta.coeffs[:, 0, 0, 0, 0]), 0.5 * times, atol=1e-12
    )


def test_phi_functions_series_and_closed_form_agree():
    """Test phi_1, phi_2, phi_3 at zero and across the switch between their two evaluations."""
    phi1, phi2, phi3 = phi_functions(np.array([0.0, -0.999999, -1.0, -40.0]))
    np.testing.assert_allclose(phi1[:1], [1.0])
    np.testing.assert_allclose(phi2[:1], [0.5])
    np.testing.assert_allclose(phi3[:1], [1.0 / 6.0])
    np.testing.assert_allclose(phi1[1], phi1[2], rtol=1e-5)
    np.testing.assert_allclose(phi3[1], phi3[2], rtol=1e-5)
    assert phi1[2] == pytest.approx(1.0 - np.exp(-1.0), rel=1e-14)
    assert phi2[2] == pytest.approx(np.exp(-1.0), rel=1e-13)
    expected = (40.0**2 / 2.0 - 40.0 + 1.0 - np.exp(-40.0)) / 40.0**3
    assert phi3[3] == pytest.approx(expected, rel=1e-12)


def test_oscillatory_diffusion_resolution(grid16, config):
    """Test non-integer or unresolved frequencies are refused."""
    g = Field.scalar(grid16, np.ones(grid16.shape))
    with pytest.raises(GridMismatchError):
        solve_oscillatory_diffusion_test(None, g, 2.5, (0, 0, 1), (0.0, 0.1), 0.05, config)
    with pytest.raises(GridMismatchError):
        solve_oscillatory_diffusion_test(None, g, 4, (0, 0, 2), (0.0, 0.1), 0.05, config)


def test_heat_mode_response():
    """Test the closed-form amplitude."""
    assert heat_mode_response(2, 0.0) == 0.0
    assert heat_mode_response(2, 100.0) == pytest.approx(0.25)


def test_backflow_under_shear(grid16, config):
    """Test psi1 = -A sin(x2) (t - t_i) and |grad Phi - Id| = A |t - t_i|."""
    A = 0.3
    v = constant_series(shear(grid16, A), 0.0, 0.05, 9)
    flow = solve_backflow(v, 0.2, (0.0, 0.4), config)
    assert len(flow.psi) == 9
    for s, t in enumerate(flow.psi.times):
        psi = flow.psi.snapshot(s).samples()
        np.testing.assert_allclose(psi[0], -A * np.sin(grid16.x[1]) * (t - 0.2), atol=1e-12)
        assert flow.deviation(s) == pytest.approx(A * abs(t - 0.2), abs=1e-12)
        np.testing.assert_allclose(flow.determinant(s), 1.0, atol=1e-12)
    np.testing.assert_allclose(flow.phase(4), grid16.x, atol=1e-14)
    with pytest.raises(GridMismatchError):
        solve_backflow(v, 0.2, (0.0, 0.6), config)


def test_step_budget_exhausted(grid16):
    """Test the substep budget aborts the solve."""
    theta0 = Field.scalar(grid16, np.sin(grid16.x[2]))
    tight = SolverConfig(max_substeps=2)
    with pytest.raises(CFLViolationError) as excinfo:
        solve_transport_diffusion(None, theta0, (0.0, 0.5), 0.05, tight)
    assert 'required' in excinfo.value.diagnostics


def test_non_finite_state_aborts(grid16, config):
    """Test NaN forcing is detected as a blow-up."""
    nan = np.full((1,) + grid16.shape, np.nan, dtype=complex)
    with pytest.raises(BlowUpError):
        solve_transport_diffusion(
            None, Field.zeros(grid16), (0.0, 0.1), 0.05, config, forcing=lambda t: nan
        )


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
