"""
Linear operators of the construction: mollification, Leray projection,
Biot-Savart potential, inverse divergence, traceless parts and the
quadratic commutator.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import roots_legendre

from bousci.core.errors import GridMismatchError, NonZeroMeanError, UnresolvedMollifierError
from bousci.core.params import lattice_sum
from bousci.fields.field import DIAGONAL, Field, Rank, multiply, sym_outer
from bousci.fields.grid import Grid


logger = logging.getLogger(__name__)

QUADRATURE_NODES = 256
MEAN_TOLERANCE = 1e-10

# Sup of |symbol(k)| * |k| over unit wave vectors, Frobenius norm of the
# output tensor per unit input: 1/2 + sqrt(3)/2 + 2.
INVERSE_DIVERGENCE_SYMBOL_BOUND = 0.5 + 0.5 * math.sqrt(3.0) + 2.0


@dataclass(frozen=True)
class MollifierSpec:
    """
    Radial bump C exp(-1/(1-|x|^2)) on the unit ball, unit mass, scaled to length l.

    The Fourier transform is computed by Gauss-Legendre quadrature of the
    radial integral and normalized so that its value at zero is exactly one.
    """

    length: float
    nodes: int = QUADRATURE_NODES

    def transform(self, kappa: np.ndarray) -> np.ndarray:
        """phi_hat(l * kappa) for wavenumber magnitudes kappa."""
        r, w = _radial_quadrature(self.nodes)
        xi = np.asarray(kappa, dtype=float)[..., None] * self.length
        weights = w * np.exp(-1.0 / (1.0 - r**2)) * r**2
        return np.sum(weights * np.sinc(xi * r / math.pi), axis=-1) / np.sum(weights)


@lru_cache(maxsize=8)
def _radial_quadrature(nodes: int):  # type: ignore[no-untyped-def]
    x, w = roots_legendre(nodes)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=32)
def _mollifier_multiplier(n: int, length: float) -> np.ndarray:
    grid = Grid(n)
    kappa = np.sqrt(np.sum(grid.k_lattice.astype(float) ** 2, axis=0))
    radii, inverse = np.unique(kappa, return_inverse=True)
    values = MollifierSpec(length).transform(radii)
    out = values[inverse].reshape(grid.shape)
    out.setflags(write=False)
    return out


def mollifier_multiplier(grid: Grid, length: float) -> np.ndarray:
    return _mollifier_multiplier(grid.n, float(length))


def mollify(field: Field, length: float) -> Field:
    """
    f * phi_l computed spectrally.

    Raises:
        UnresolvedMollifierError: if l does not exceed the grid step
    """
    if length <= field.grid.dx:
        raise UnresolvedMollifierError(length, field.grid.dx)
    return field.with_coeffs(field.coeffs * mollifier_multiplier(field.grid, length))


def leray_project(v: Field) -> Field:
    """Divergence-free part of a vector field (mean preserved)."""
    if v.rank is not Rank.VECTOR:
        raise GridMismatchError("leray_project expects a vector field")
    k = v.grid.k
    kdotv = np.sum(k * v.coeffs, axis=0)
    return v.with_coeffs(v.coeffs - k * kdotv / v.grid.k2_safe)


def biot_savart(v: Field) -> Field:
    """z = (-Delta)^{-1} curl v; div z = 0 and curl z = v - mean(v) for div-free v."""
    if v.rank is not Rank.VECTOR:
        raise GridMismatchError("biot_savart expects a vector field")
    grid = v.grid
    ik = 1j * grid.k
    c = v.coeffs
    cross = np.stack(
        [
            ik[1] * c[2] - ik[2] * c[1],
            ik[2] * c[0] - ik[0] * c[2],
            ik[0] * c[1] - ik[1] * c[0],
        ]
    )
    return v.with_coeffs(np.where(grid.zero_mode, 0.0, cross / grid.k2_safe))


def check_zero_mean(f: Field, tolerance: float = MEAN_TOLERANCE, context: str = "") -> None:
    m = np.real(f.coeffs[:, 0, 0, 0])
    if np.max(np.abs(m)) > tolerance:
        raise NonZeroMeanError(m, tolerance, context)


def inverse_divergence(
    f: Field, tolerance: float = MEAN_TOLERANCE, context: str = ""
) -> Field:
    """
    Symmetric R with div R = f for mean-zero f.

    R_ij = -1/2 D^-2 d_i d_j d_k f_k - 1/2 D^-1 d_k f_k delta_ij
           + D^-1 d_i f_j + D^-1 d_j f_i

    Raises:
        NonZeroMeanError: if |mean(f)| exceeds ``tolerance``
    """
    if f.rank is not Rank.VECTOR:
        raise GridMismatchError("inverse_divergence expects a vector field")
    check_zero_mean(f, tolerance, context)
    grid = f.grid
    k = grid.k
    k2 = grid.k2_safe
    kf = np.sum(k * f.coeffs, axis=0)
    live = ~grid.zero_mode
    comps = []
    for i, j in ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)):
        term = 0.5j * k[i] * k[j] * kf / k2**2
        if i == j:
            term = term + 0.5j * kf / k2
        term = term - 1j * (k[i] * f.coeffs[j] + k[j] * f.coeffs[i]) / k2
        comps.append(np.where(live, term, 0.0))
    return Field(grid, Rank.SYM_TENSOR, np.stack(comps))


def traceless(T: Field) -> Field:
    """T - (tr T / 3) Id."""
    if T.rank is not Rank.SYM_TENSOR:
        raise GridMismatchError("traceless expects a symmetric tensor")
    c = np.array(T.coeffs)
    tr = (c[0] + c[3] + c[5]) / 3.0
    for d in DIAGONAL:
        c[d] = c[d] - tr
    return T.with_coeffs(c)


def identity_tensor(f: Field) -> Field:
    """Scalar f times the identity matrix."""
    c = np.zeros((6,) + f.grid.shape, dtype=complex)
    for d in DIAGONAL:
        c[d] = f.coeffs[0]
    return Field(f.grid, Rank.SYM_TENSOR, c)


def traceless_product(f: Field, g: Field, dealias: bool = True) -> Field:
    """Traceless part of the symmetrized product f (x) g (padded grid)."""
    return traceless(sym_outer(f, g, dealias))


def quadratic_commutator(f: Field, g: Field, length: float, dealias: bool = True) -> Field:
    """(f * phi_l)(g * phi_l) - (f g) * phi_l for a scalar f and any-rank g."""
    return multiply(mollify(f, length), mollify(g, length), dealias) - mollify(
        multiply(f, g, dealias), length
    )


def sobolev_constant(s: float, band: Optional[int] = None) -> float:
    """
    C_s with ||R(v)||_0 <= C_s ||v||_{H^s-dot} for s > 1/2.

    C_s = bound * (sum_{k != 0} |k|^{-2(1+s)})^{1/2} / (2 pi)^{3/2}; restricting
    the lattice sum to the grid band (|k_i| < band) gives the constant for
    fields resolved on that grid.
    """
    if s <= 0.5:
        raise ValueError("sobolev_constant requires s > 1/2")
    total = lattice_sum(2.0 * (1.0 + s), band=band)
    return INVERSE_DIVERGENCE_SYMBOL_BOUND * math.sqrt(total) / (2.0 * math.pi) ** 1.5
