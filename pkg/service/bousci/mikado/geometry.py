"""
Geometry of the six periodic Mikado tubes.

Directions are the integer vectors (1,+-1,0), (0,1,+-1), (1,0,+-1). Their dyads
form a basis of symmetric 3x3 matrices and Id = sum_j (1/4) k_j (x) k_j. Tube
profiles are transverse Laplacians of the radial bump (1 - s^2/r^2)^p.
"""

import itertools
import math
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.special import factorial, jv, roots_legendre


DIRECTIONS = np.array(
    [[1, 1, 0], [1, -1, 0], [0, 1, 1], [0, 1, -1], [1, 0, 1], [1, 0, -1]], dtype=int
)
SYM_ORDER = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
# Torus volume over the length of one periodic tube axis (|k_j| = sqrt(2)).
CELL_AREA = 8.0 * math.pi**3 / (2.0 * math.pi * math.sqrt(2.0))
PAIRS = tuple(itertools.combinations(range(6), 2))
IMAGES = np.array(list(itertools.product((-1, 0, 1), repeat=3)), dtype=float)


def dyad_matrix() -> np.ndarray:
    """6x6 matrix sending weights c to the symmetric components of sum_j c_j k_j (x) k_j."""
    A = np.zeros((6, 6))
    for j, d in enumerate(DIRECTIONS):
        for row, (a, b) in enumerate(SYM_ORDER):
            A[row, j] = d[a] * d[b]
    return A


@lru_cache(maxsize=1)
def dual_map() -> np.ndarray:
    """Inverse of ``dyad_matrix``: c = L @ (R11, R12, R13, R22, R23, R33)."""
    L = np.linalg.inv(dyad_matrix())
    L.setflags(write=False)
    return L


def dual_frobenius_norms() -> np.ndarray:
    """||L_j|| as functionals on symmetric matrices with the Frobenius inner product."""
    L = dual_map()
    diag = [0, 3, 5]
    off = [1, 2, 4]
    return np.sqrt(np.sum(L[:, diag] ** 2, axis=1) + 0.5 * np.sum(L[:, off] ** 2, axis=1))


def admissible_radius() -> float:
    """Largest rho with c_j(R) > 0 for all ||R - Id||_F < rho."""
    return float(np.min(0.25 / dual_frobenius_norms()))


def _pair_constants() -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    normals = np.array([np.cross(DIRECTIONS[a], DIRECTIONS[b]) for a, b in PAIRS])
    gcd = np.array([np.gcd.reduce(np.abs(c)) for c in normals])
    return normals.astype(float), np.linalg.norm(normals, axis=1), gcd.astype(float)


def line_distances(offsets: np.ndarray) -> np.ndarray:
    """
    Distances between all 15 pairs of periodic tube axes.

    Args:
        offsets: (..., 6, 3) points on the axes

    Returns:
        (..., 15) distances on the torus
    """
    normals, lengths, gcd = _pair_constants()
    ia = np.array([a for a, _ in PAIRS])
    ib = np.array([b for _, b in PAIRS])
    delta = offsets[..., ib, :] - offsets[..., ia, :]
    proj = np.sum(delta * normals, axis=-1)
    period = 2.0 * math.pi * gcd
    folded = np.mod(proj, period)
    return np.minimum(folded, period - folded) / lengths


def search_offsets(trials: int, seed: int, refine_steps: int = 512) -> Tuple[np.ndarray, float]:
    """
    Seeded random search plus hill climbing maximizing the minimal axis distance.

    Returns:
        (offsets (6, 3), achieved minimal distance)
    """
    rng = np.random.default_rng(seed)
    candidates = rng.uniform(0.0, 2.0 * math.pi, size=(trials, 6, 3))
    scores = np.min(line_distances(candidates), axis=-1)
    best_index = int(np.argmax(scores))
    best = candidates[best_index]
    best_score = float(scores[best_index])
    step = 0.25
    for _ in range(refine_steps):
        proposal = np.mod(best + rng.normal(scale=step, size=best.shape), 2.0 * math.pi)
        score = float(np.min(line_distances(proposal)))
        if score > best_score:
            best, best_score = proposal, score
        else:
            step = max(step * 0.995, 1e-3)
    return best, best_score


def transverse_offset(
    points: np.ndarray, offset: np.ndarray, direction: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Perpendicular displacement from the nearest periodic image of a tube axis.

    Args:
        points: (3, ...) positions (any real values; periodicity handled here)
        offset: (3,) point on the axis
        direction: (3,) integer direction

    Returns:
        (y_perp (3, ...), s^2 (...)) for the nearest image
    """
    unit = np.asarray(direction, dtype=float) / np.linalg.norm(direction)
    shape = (3,) + (1,) * (points.ndim - 1)
    y = points - np.asarray(offset, dtype=float).reshape(shape)
    y = np.mod(y + math.pi, 2.0 * math.pi) - math.pi
    best_perp = None
    best_s2 = None
    for image in IMAGES:
        ym = y + 2.0 * math.pi * image.reshape(shape)
        along = np.tensordot(unit, ym, axes=(0, 0))
        perp = ym - unit.reshape(shape) * along
        s2 = np.sum(perp**2, axis=0)
        if best_s2 is None:
            best_perp, best_s2 = perp, s2
        else:
            closer = s2 < best_s2
            best_s2 = np.where(closer, s2, best_s2)
            best_perp = np.where(closer[None], perp, best_perp)
    return best_perp, best_s2


# Radial bump and its transverse derivatives -----------------------------------

def bump(s2: np.ndarray, radius: float, order: int) -> np.ndarray:
    """(1 - s^2/r^2)^p inside the tube, zero outside."""
    u = np.clip(s2 / radius**2, 0.0, 1.0)
    return (1.0 - u) ** order


def bump_laplacian(s2: np.ndarray, radius: float, order: int) -> np.ndarray:
    """Transverse Laplacian -(4p/r^2) (1-u)^(p-2) (1 - p u)."""
    u = np.clip(s2 / radius**2, 0.0, 1.0)
    return -(4.0 * order / radius**2) * (1.0 - u) ** (order - 2) * (1.0 - order * u)


def bump_gradient_factor(s2: np.ndarray, radius: float, order: int) -> np.ndarray:
    """grad B = factor * y_perp with factor = -(2p/r^2) (1-u)^(p-1)."""
    u = np.clip(s2 / radius**2, 0.0, 1.0)
    return -(2.0 * order / radius**2) * (1.0 - u) ** (order - 1)


def laplacian_square_integral(radius: float, order: int, nodes: int = 128) -> float:
    """Integral over the transverse plane of (Delta B)^2."""
    x, w = roots_legendre(nodes)
    s = 0.5 * radius * (x + 1.0)
    values = bump_laplacian(s**2, radius, order) ** 2
    return float(2.0 * math.pi * np.sum(0.5 * radius * w * values * s))


def continuum_normalization(radius: float, order: int) -> float:
    """c_n with mean of (c_n Delta B)^2 over the torus equal to one."""
    return math.sqrt(CELL_AREA / laplacian_square_integral(radius, order))


def bump_transform(kappa: np.ndarray, radius: float, order: int) -> np.ndarray:
    """Plane Fourier transform of B(s) = (1 - s^2/r^2)^p, a real radial function of kappa."""
    kappa = np.asarray(kappa, dtype=float)
    x = np.maximum(kappa * radius, 1e-12)
    nu = order + 1
    return 2.0 * math.pi * radius**2 * 2.0**order * factorial(order) * jv(nu, x) / x**nu


def profile_transform(kappa: np.ndarray, radius: float, order: int) -> np.ndarray:
    """
    Torus Fourier coefficient magnitude of a unit-normalized continuum profile
    at transverse wavenumber kappa: c_n kappa^2 |B_hat(kappa)| / A_cell.
    """
    kappa = np.asarray(kappa, dtype=float)
    c_n = continuum_normalization(radius, order)
    return np.abs(c_n * kappa**2 * bump_transform(kappa, radius, order)) / CELL_AREA


def plane_modes(direction: np.ndarray, bound: int) -> np.ndarray:
    """Nonzero integer modes k with k . direction = 0 and all |k_i| <= bound, shape (m, 3)."""
    d = np.asarray(direction, dtype=int)
    pivot = int(np.flatnonzero(d)[0])
    free = [axis for axis in range(3) if axis != pivot]
    r = np.arange(-bound, bound + 1)
    a, b = (g.ravel() for g in np.meshgrid(r, r, indexing='ij'))
    rest = d[free[0]] * a + d[free[1]] * b
    modes = np.zeros((a.size, 3), dtype=int)
    modes[:, free[0]] = a
    modes[:, free[1]] = b
    modes[:, pivot] = -rest // d[pivot]
    keep = (rest % d[pivot] == 0) & (np.abs(modes[:, pivot]) <= bound)
    keep &= np.any(modes != 0, axis=1)
    return modes[keep]
