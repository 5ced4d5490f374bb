"""
Spectral derivatives on the torus.
"""

from typing import Sequence

import numpy as np

from bousci.core.errors import GridMismatchError
from bousci.fields.field import SYM_INDEX, SYM_PAIRS, Field, Rank, to_physical, to_spectral


def derivative(field: Field, gamma: Sequence[int]) -> Field:
    """
    D^gamma f: multiply coefficients by (i k)^gamma.

    Args:
        field: Field of any rank (applied component-wise)
        gamma: Multi-index (g1, g2, g3)
    """
    gamma = tuple(int(g) for g in gamma)
    if len(gamma) != 3 or min(gamma) < 0:
        raise GridMismatchError(f"invalid multi-index {gamma}")
    if sum(gamma) > field.grid.n // 4:
        raise GridMismatchError(f"derivative order {sum(gamma)} exceeds n/4")
    k = field.grid.k
    symbol = np.ones(field.grid.shape, dtype=complex)
    for axis, g in enumerate(gamma):
        if g:
            symbol = symbol * (1j * k[axis]) ** g
    return field.with_coeffs(field.coeffs * symbol)


def grad(f: Field) -> Field:
    """Gradient of a scalar."""
    if f.rank is not Rank.SCALAR:
        raise GridMismatchError("grad expects a scalar field")
    return Field(f.grid, Rank.VECTOR, 1j * f.grid.k * f.coeffs[0])


def grad_vector_coeffs(v: Field) -> np.ndarray:
    """Coefficients of dv_a/dx_b, shape (3, 3, n, n, n) indexed [a, b]."""
    return 1j * v.grid.k[None, :] * v.coeffs[:, None]


def div(f: Field) -> Field:
    """Divergence of a vector (scalar result) or of a symmetric tensor (vector result)."""
    k = f.grid.k
    if f.rank is Rank.VECTOR:
        return Field(f.grid, Rank.SCALAR, np.sum(1j * k * f.coeffs, axis=0)[None])
    if f.rank is Rank.SYM_TENSOR:
        full = f.full_coeffs()
        return Field(f.grid, Rank.VECTOR, np.einsum('bxyz,abxyz->axyz', 1j * k, full))
    raise GridMismatchError("div expects a vector or symmetric tensor")


def curl(v: Field) -> Field:
    if v.rank is not Rank.VECTOR:
        raise GridMismatchError("curl expects a vector field")
    ik = 1j * v.grid.k
    c = v.coeffs
    out = np.stack(
        [
            ik[1] * c[2] - ik[2] * c[1],
            ik[2] * c[0] - ik[0] * c[2],
            ik[0] * c[1] - ik[1] * c[0],
        ]
    )
    return Field(v.grid, Rank.VECTOR, out)


def laplacian(f: Field) -> Field:
    return f.with_coeffs(-f.grid.k2 * f.coeffs)


def inverse_laplacian(f: Field) -> Field:
    """Delta^{-1} on the modes with nonzero wavenumber; the rest is set to zero."""
    grid = f.grid
    return f.with_coeffs(np.where(grid.zero_mode, 0.0, -f.coeffs / grid.k2_safe))


def trace(T: Field) -> Field:
    if T.rank is not Rank.SYM_TENSOR:
        raise GridMismatchError("trace expects a symmetric tensor")
    return Field(T.grid, Rank.SCALAR, (T.coeffs[0] + T.coeffs[3] + T.coeffs[5])[None])


def advect(v: Field, f: Field, dealias: bool = True) -> Field:
    """(v . grad) f for a scalar or vector field f."""
    v.grid.check_same(f.grid)
    grid = v.grid
    pv = to_physical(grid, v.coeffs, dealias)
    dfs = 1j * grid.k[None, :] * f.coeffs[:, None]  # [component, b]
    pdf = to_physical(grid, dfs, dealias)
    out = np.einsum('bxyz,abxyz->axyz', pv, pdf)
    return f.with_coeffs(to_spectral(grid, out, dealias))


def div_outer(v: Field, dealias: bool = True) -> Field:
    """div(v (x) v) in divergence form."""
    grid = v.grid
    pv = to_physical(grid, v.coeffs, dealias)
    comps = np.stack([pv[i] * pv[j] for i, j in SYM_PAIRS])
    tensor = to_spectral(grid, comps, dealias)[SYM_INDEX]
    return Field(grid, Rank.VECTOR, np.einsum('bxyz,abxyz->axyz', 1j * grid.k, tensor))


__all__ = [
    'derivative', 'grad', 'grad_vector_coeffs', 'div', 'curl', 'laplacian',
    'inverse_laplacian', 'trace', 'advect', 'div_outer',
]
