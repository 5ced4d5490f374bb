"""
Tests for norms and the linear operators of the construction
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bousci.core.errors import NonZeroMeanError, UnresolvedMollifierError
from bousci.fields.calculus import (
    MollifierSpec,
    biot_savart,
    identity_tensor,
    inverse_divergence,
    leray_project,
    mollify,
    quadratic_commutator,
    sobolev_constant,
    traceless,
    traceless_product,
)
from bousci.fields.derivatives import curl, div, grad, trace
from bousci.fields.field import Field, Rank, TimeSeriesField, dealias, multiply
from bousci.fields.grid import Grid
from bousci.fields.norms import (
    VOLUME,
    holder_norm,
    holder_seminorm,
    integral,
    l2_norm,
    mean,
    series_max,
    sobolev_norm,
    sup_norm,
)


def mean_zero_vector(grid: Grid, seed: int) -> Field:
    """Dealiased random vector field with zero mean."""
    rng = np.random.default_rng(seed)
    v = dealias(Field.vector(grid, rng.standard_normal((3,) + grid.shape)))
    coeffs = np.array(v.coeffs)
    coeffs[:, 0, 0, 0] = 0.0
    return v.with_coeffs(coeffs)


# Norms ------------------------------------------------------------------------

def test_l2_and_sobolev_norms(grid16):
    """Test ||sin x3|| = sqrt(4 pi^3) and the H^1 weight of sin(2 x3)."""
    s1 = Field.scalar(grid16, np.sin(grid16.x[2]))
    s2 = Field.scalar(grid16, np.sin(2.0 * grid16.x[2]))
    assert l2_norm(s1) == pytest.approx(math.sqrt(4.0 * math.pi**3))
    assert sobolev_norm(s2, 1.0) == pytest.approx(2.0 * math.sqrt(4.0 * math.pi**3))
    assert sobolev_norm(Field.scalar(grid16, np.ones(grid16.shape)), 0.5) == 0.0


def test_tensor_l2_counts_off_diagonal_twice(grid16):
    """Test the Frobenius weighting of stored off-diagonal components."""
    comps = np.zeros((6,) + grid16.shape)
    comps[1] = 1.0
    T = Field.from_samples(grid16, comps, Rank.SYM_TENSOR)
    assert l2_norm(T) == pytest.approx(math.sqrt(2.0 * VOLUME))
    assert sup_norm(T) == pytest.approx(math.sqrt(2.0))


def test_mean_and_integral(grid16):
    """Test the space average and the integral."""
    f = Field.scalar(grid16, 3.0 + np.sin(grid16.x[0]))
    assert mean(f) == pytest.approx(3.0)
    assert integral(f) == pytest.approx(3.0 * VOLUME)
    v = Field.vector(grid16, np.stack([np.ones(grid16.shape), np.zeros(grid16.shape),
                                       -np.ones(grid16.shape)]))
    np.testing.assert_allclose(mean(v), [1.0, 0.0, -1.0], atol=1e-14)


def test_holder_norm_integer_orders(grid16):
    """Test C^0 and C^1 norms of sin(x3)."""
    f = Field.scalar(grid16, np.sin(grid16.x[2]))
    assert sup_norm(f) == pytest.approx(1.0)
    assert holder_norm(f, 0).value == pytest.approx(1.0)
    estimate = holder_norm(f, 1)
    assert estimate.value == pytest.approx(2.0)
    assert estimate.resolved


def test_holder_seminorm_fractional(grid16):
    """Test the fractional seminorm of sin(x3) lies between the C^0 and C^1 bounds."""
    f = Field.scalar(grid16, np.sin(grid16.x[2]))
    value = holder_seminorm(f, 0.5)
    assert 0.0 < value <= 2.0
    assert float(holder_norm(f, 0.5)) == pytest.approx(1.0 + value)


def test_holder_norm_flags_unresolved(grid16):
    """Test energy beyond the dealiasing cutoff marks the estimate unresolved."""
    rng = np.random.default_rng(0)
    noisy = Field.scalar(grid16, rng.standard_normal(grid16.shape))
    assert not holder_norm(noisy, 0.3).resolved


def test_series_max(grid16):
    """Test the maximum over stored samples."""
    f = Field.scalar(grid16, np.sin(grid16.x[2]))
    series = TimeSeriesField.from_fields([f, f * 3.0, f * 2.0], 0.0, 0.1)
    assert series_max(series, sup_norm) == pytest.approx(3.0)


def band_limited_scalar(grid: Grid, seed: int, band: int = 2) -> Field:
    """Random scalar with all |k_i| <= band."""
    rng = np.random.default_rng(seed)
    f = Field.scalar(grid, rng.standard_normal(grid.shape))
    keep = np.all(np.abs(grid.k) <= band, axis=0)
    return f.with_coeffs(np.where(keep, f.coeffs, 0.0))


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    rank=st.sampled_from([Rank.SCALAR, Rank.VECTOR, Rank.SYM_TENSOR]),
)
def test_parseval_on_random_fields(seed, rank):
    """Test ||f||^2 from the coefficients equals the grid quadrature of |f|^2."""
    grid = Grid(16)
    rng = np.random.default_rng(seed)
    f = Field.from_samples(grid, rng.standard_normal((rank.value,) + grid.shape), rank)
    s = f.full() if rank is Rank.SYM_TENSOR else f.samples()
    quadrature = float(np.sum(s**2)) * grid.dx**3
    assert l2_norm(f) ** 2 == pytest.approx(quadrature, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(
    seed_f=st.integers(min_value=0, max_value=2**32 - 1),
    seed_g=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_product_inequality_ratio(seed_f, seed_g):
    """Test ||fg||_N <= 4 (||f||_N ||g||_0 + ||g||_N ||f||_0) for N = 1, 2, 3."""
    grid = Grid(16)
    f = band_limited_scalar(grid, seed_f)
    g = band_limited_scalar(grid, seed_g)
    fg = multiply(f, g)
    f0, g0 = sup_norm(f), sup_norm(g)
    for order in (1, 2, 3):
        bound = holder_norm(f, order).value * g0 + holder_norm(g, order).value * f0
        assert holder_norm(fg, order).value <= 4.0 * bound


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    s1=st.floats(min_value=0.0, max_value=1.0),
    s2=st.floats(min_value=1.0, max_value=3.0),
    weight=st.floats(min_value=0.0, max_value=1.0),
)
def test_sobolev_interpolation(seed, s1, s2, weight):
    """Test ||v||_s <= ||v||_s1^w ||v||_s2^(1-w) for s = w s1 + (1 - w) s2."""
    v = mean_zero_vector(Grid(8), seed)
    s = weight * s1 + (1.0 - weight) * s2
    lhs = sobolev_norm(v, s)
    rhs = sobolev_norm(v, s1) ** weight * sobolev_norm(v, s2) ** (1.0 - weight)
    assert lhs <= rhs * (1.0 + 1e-12)


# Operators --------------------------------------------------------------------

def test_mollifier_transform_normalized():
    """Test phi_hat(0) = 1 and decay with wavenumber."""
    spec = MollifierSpec(0.5)
    values = spec.transform(np.array([0.0, 1.0, 4.0, 40.0]))
    assert values[0] == pytest.approx(1.0, abs=1e-14)
    assert np.all(np.diff(values[:3]) < 0.0)
    assert abs(values[3]) < 0.05


def test_mollify_preserves_constants_and_needs_resolution(grid16):
    """Test mollification keeps means and refuses l <= dx."""
    f = Field.scalar(grid16, 2.0 + np.sin(grid16.x[2]))
    g = mollify(f, 0.5)
    assert mean(g) == pytest.approx(2.0)
    assert sup_norm(g - Field.scalar(grid16, np.full(grid16.shape, 2.0))) < 1.0
    with pytest.raises(UnresolvedMollifierError):
        mollify(f, grid16.dx)


def test_leray_projection(grid16):
    """Test the projection is divergence free and removes gradients."""
    v = mean_zero_vector(grid16, 5)
    p = leray_project(v)
    assert np.max(np.abs(div(p).coeffs)) < 1e-12
    phi = dealias(Field.scalar(grid16, np.cos(grid16.x[0] + 2.0 * grid16.x[1])))
    assert sup_norm(leray_project(grad(phi))) < 1e-12


def test_biot_savart_inverts_curl(grid16):
    """Test curl of the potential returns a divergence-free field."""
    v = leray_project(mean_zero_vector(grid16, 6))
    z = biot_savart(v)
    assert np.max(np.abs(div(z).coeffs)) < 1e-12
    np.testing.assert_allclose(curl(z).coeffs, v.coeffs, atol=1e-12)


def test_inverse_divergence_identity(grid16):
    """Test div R = f with R symmetric and traceless."""
    f = mean_zero_vector(grid16, 7)
    R = inverse_divergence(f)
    assert R.rank is Rank.SYM_TENSOR
    np.testing.assert_allclose(div(R).coeffs, f.coeffs, atol=1e-12)
    assert np.max(np.abs(trace(R).coeffs)) < 1e-12


def test_inverse_divergence_requires_zero_mean(grid16):
    """Test a nonzero mean is rejected."""
    f = Field.vector(grid16, np.ones((3,) + grid16.shape))
    with pytest.raises(NonZeroMeanError):
        inverse_divergence(f, context="test")


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_inverse_divergence_random_fields(seed):
    """Test div R = f with R real, symmetric, traceless and mean-zero on random fields."""
    grid = Grid(32)
    f = mean_zero_vector(grid, seed)
    R = inverse_divergence(f)
    assert np.max(np.abs(div(R).coeffs - f.coeffs)) < 1e-10
    assert R.is_hermitian(1e-12)
    full = R.full()
    np.testing.assert_array_equal(full, np.swapaxes(full, 0, 1))
    assert np.max(np.abs(trace(R).coeffs)) < 1e-10
    assert np.max(np.abs(R.coeffs[:, 0, 0, 0])) == 0.0


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_biot_savart_random_fields(seed):
    """Test div z = 0 and curl z = v - mean(v) for random divergence-free v with a mean."""
    grid = Grid(32)
    rng = np.random.default_rng(seed)
    v = leray_project(mean_zero_vector(grid, seed))
    coeffs = np.array(v.coeffs)
    offset = rng.standard_normal(3)
    coeffs[:, 0, 0, 0] = offset
    v = v.with_coeffs(coeffs)
    z = biot_savart(v)
    assert np.max(np.abs(div(z).coeffs)) < 1e-10
    expected = np.array(v.coeffs)
    expected[:, 0, 0, 0] = 0.0
    assert np.max(np.abs(curl(z).coeffs - expected)) < 1e-10
    np.testing.assert_allclose(mean(v), offset, atol=1e-14)


def test_traceless_and_identity(grid16):
    """Test the traceless part and the identity tensor."""
    rng = np.random.default_rng(8)
    T = Field.from_samples(grid16, rng.standard_normal((6,) + grid16.shape), Rank.SYM_TENSOR)
    assert np.max(np.abs(trace(traceless(T)).coeffs)) < 1e-12
    f = Field.scalar(grid16, np.sin(grid16.x[1]))
    np.testing.assert_allclose(trace(identity_tensor(f)).coeffs, 3.0 * f.coeffs)


def test_traceless_product_pointwise(grid16):
    """Test f (x) f for f = (sin x2, 0, 0) minus a third of its trace."""
    s2 = np.sin(grid16.x[1]) ** 2
    f = Field.vector(grid16, np.stack([np.sin(grid16.x[1]), 0.0 * s2, 0.0 * s2]))
    expected = np.zeros((6,) + grid16.shape)
    expected[0] = s2 - s2 / 3.0
    expected[3] = expected[5] = -s2 / 3.0
    np.testing.assert_allclose(traceless_product(f, f).samples(), expected, atol=1e-13)
    ident = identity_tensor(Field.scalar(grid16, np.ones(grid16.shape)))
    assert np.max(np.abs(traceless(ident).coeffs)) < 1e-14


def test_commutator_vanishes_for_constant_factor(grid16):
    """Test (c g)_l = c g_l for a constant c."""
    c = Field.scalar(grid16, np.full(grid16.shape, 2.0))
    g = Field.vector(grid16, np.stack([np.sin(grid16.x[i]) for i in range(3)]))
    assert sup_norm(quadratic_commutator(c, g, 0.5)) < 1e-12


def test_sobolev_constant():
    """Test the constant needs s > 1/2 and shrinks on a finite band."""
    with pytest.raises(ValueError):
        sobolev_constant(0.5)
    full = sobolev_constant(0.6)
    banded = sobolev_constant(0.6, band=8)
    assert 0.0 < banded < full


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
