"""
Mikado family W(R, xi) = sum_j Gamma_j(R) phi_j(xi) k_j.

Two realizations of the tube profiles are kept side by side:

* grid profiles: the bump sampled on a grid and passed through the 7-point
  finite-difference Laplacian. On that grid W has exactly zero mean, is
  invariant along k_j and the tubes have disjoint discrete supports, so
  div W = 0 and div(W (x) W) = 0 hold to rounding with collocation products.
* continuum profiles: the closed-form transverse Laplacian and vector
  potential, evaluated at arbitrary phases (used with lambda * Phi).
"""

import logging
import math
import threading
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from bousci.core.errors import (
    GridMismatchError,
    InadmissibleMatrixError,
    PlacementError,
    TableRangeError,
)
from bousci.core.gate_monitor import GateMonitor
from bousci.fields.derivatives import div
from bousci.fields.field import Field, Rank, sym_outer, transform_forward, transform_inverse
from bousci.fields.grid import Grid
from bousci.mikado import geometry
from bousci.mikado.geometry import DIRECTIONS


logger = logging.getLogger(__name__)

DECAY_BANDS = (64, 128, 256, 512)
SYMMETRY_TOLERANCE = 1e-12
TABLE_CHUNK = 1 << 22


@dataclass(frozen=True)
class Coefficients:
    """Weights c_j with sum_j c_j k_j (x) k_j = R and amplitudes Gamma_j = sqrt(c_j)."""

    c: np.ndarray
    gamma: np.ndarray

    @property
    def min_coefficient(self) -> float:
        return float(np.min(self.c))


def sym_components(R: np.ndarray) -> np.ndarray:
    """(R11, R12, R13, R22, R23, R33) of a 3x3 matrix or a (3, 3, ...) field."""
    return np.stack([R[a, b] for a, b in geometry.SYM_ORDER])


def weights(components: np.ndarray) -> np.ndarray:
    """c_j for symmetric components of shape (6, ...); no admissibility check."""
    return np.tensordot(geometry.dual_map(), components, axes=(1, 0))


class MikadoFamily:
    """
    Six disjoint periodic tubes with fixed directions and searched offsets.

    Instances are immutable after construction apart from the per-grid
    profile cache, which is filled under a lock.
    """

    def __init__(
        self,
        offsets: np.ndarray,
        radius: float,
        bump_order: int = 6,
        k_max: int = 16,
        grid_n: int = 64,
        seed: int = 0,
        min_distance: Optional[float] = None,
    ):
        offsets = np.asarray(offsets, dtype=float)
        if offsets.shape != (6, 3):
            raise GridMismatchError(f"offsets must have shape (6, 3), got {offsets.shape}")
        if bump_order < 6:
            raise ValueError("bump_order must be at least 6 for the decay constant to exist")
        if 2 * k_max >= grid_n:
            raise TableRangeError(f"k_max={k_max} needs grid_n > {2 * k_max}")
        offsets.setflags(write=False)
        self.offsets = offsets
        self.radius = float(radius)
        self.bump_order = int(bump_order)
        self.k_max = int(k_max)
        self.grid_n = int(grid_n)
        self.seed = int(seed)
        self.min_distance = (
            float(np.min(geometry.line_distances(offsets)))
            if min_distance is None
            else float(min_distance)
        )
        self.directions = DIRECTIONS
        self.normalization = geometry.continuum_normalization(self.radius, self.bump_order)
        self.admissible_radius = geometry.admissible_radius()
        self.gate = min(self.admissible_radius, 0.5)
        self._profiles: Dict[int, np.ndarray] = {}
        self._lock = threading.Lock()
        self.fourier_table = self._build_table()

    # coefficients

    def coefficients(self, R: np.ndarray) -> Coefficients:
        """
        Solve sum_j c_j k_j (x) k_j = R.

        Raises:
            InadmissibleMatrixError: if some c_j <= 0
        """
        R = np.asarray(R, dtype=float)
        if R.shape != (3, 3) or np.max(np.abs(R - R.T)) > SYMMETRY_TOLERANCE:
            raise ValueError("R must be a symmetric 3x3 matrix")
        c = weights(sym_components(R))
        if np.min(c) <= 0.0:
            raise InadmissibleMatrixError(float(np.min(c)))
        return Coefficients(c=c, gamma=np.sqrt(c))

    def in_gate(self, R: np.ndarray) -> bool:
        return float(np.linalg.norm(np.asarray(R) - np.eye(3))) < self.gate

    def certify_radius(self, samples: int = 2000, seed: int = 0) -> float:
        """min_j c_j over random R on the sphere just inside the admissible radius."""
        rng = np.random.default_rng(seed)
        E = rng.normal(size=(samples, 3, 3))
        E = 0.5 * (E + np.transpose(E, (0, 2, 1)))
        E /= np.linalg.norm(E, axis=(1, 2))[:, None, None]
        R = np.eye(3)[None] + (1.0 - 1e-9) * self.admissible_radius * E
        c = weights(sym_components(np.transpose(R, (1, 2, 0))))
        return float(np.min(c))

    # grid realization

    def profile_samples(self, n: int) -> np.ndarray:
        """Normalized grid profiles phi_j, shape (6, n, n, n)."""
        with self._lock:
            cached = self._profiles.get(n)
            if cached is None:
                cached = self._build_profiles(n)
                self._profiles[n] = cached
        return cached

    def _build_profiles(self, n: int) -> np.ndarray:
        grid = Grid(n)
        profiles = np.empty((6,) + grid.shape)
        for j in range(6):
            _, s2 = geometry.transverse_offset(grid.x, self.offsets[j], DIRECTIONS[j])
            b = geometry.bump(s2, self.radius, self.bump_order)
            lap = -6.0 * b
            for axis in range(3):
                lap = lap + np.roll(b, 1, axis=axis) + np.roll(b, -1, axis=axis)
            lap /= grid.dx**2
            power = float(np.mean(lap**2))
            if power == 0.0:
                raise GridMismatchError(f"tube {j} has no samples on the {n}^3 grid")
            profiles[j] = lap / math.sqrt(power)
        overlap = int(np.sum(np.count_nonzero(profiles, axis=0) > 1))
        if overlap:
            required = 2.0 * self.radius + 2.0 * math.sqrt(3.0) * grid.dx
            raise PlacementError(self.min_distance, required)
        profiles.setflags(write=False)
        logger.debug(f"Mikado profiles built on {n}^3 grid")
        return profiles

    def W_samples(self, R: np.ndarray, n: int) -> np.ndarray:
        gamma = self.coefficients(R).gamma
        profiles = self.profile_samples(n)
        return np.einsum('j,jxyz,ja->axyz', gamma, profiles, DIRECTIONS.astype(float))

    def evaluate_W(self, R: np.ndarray, grid: Grid) -> Field:
        """W(R, .) on the given grid as a vector field."""
        return Field.from_samples(grid, self.W_samples(R, grid.n), Rank.VECTOR)

    def second_moment(self, R: np.ndarray, n: Optional[int] = None) -> np.ndarray:
        """Volume average of W (x) W on the grid (the family grid by default)."""
        W = self.W_samples(R, n or self.grid_n)
        return np.einsum('axyz,bxyz->ab', W, W) / W[0].size

    # Fourier table

    def _build_table(self) -> np.ndarray:
        n, K = self.grid_n, self.k_max
        coeffs = transform_forward(self.profile_samples(n))
        idx = np.arange(-K, K + 1) % n
        table = coeffs[(slice(None),) + np.ix_(idx, idx, idx)]
        k = np.arange(-K, K + 1)
        kk = np.stack(np.meshgrid(k, k, k, indexing='ij'))
        for j, d in enumerate(DIRECTIONS):
            table[j][np.tensordot(d, kk, axes=(0, 0)) != 0] = 0.0
        table.setflags(write=False)
        return table

    def a_k(self, R: np.ndarray, k: Sequence[int]) -> np.ndarray:
        """
        a_k(R) = sum_j Gamma_j(R) phi_hat_{j,k} k_j.

        Raises:
            TableRangeError: if some |k_i| > k_max
        """
        k = np.asarray(k, dtype=int)
        if k.shape != (3,) or np.max(np.abs(k)) > self.k_max:
            raise TableRangeError(f"mode {k.tolist()} outside |k_i| <= {self.k_max}")
        gamma = self.coefficients(R).gamma
        phi = self.fourier_table[(slice(None),) + tuple(k + self.k_max)]
        return np.einsum('j,j,ja->a', gamma, phi, DIRECTIONS.astype(complex))

    def table_vectors(self, R: np.ndarray) -> np.ndarray:
        """All table coefficients a_k(R), shape (3, 2K+1, 2K+1, 2K+1)."""
        gamma = self.coefficients(R).gamma
        return np.einsum('j,jxyz,ja->axyz', gamma, self.fourier_table, DIRECTIONS.astype(complex))

    def table_reconstruction(self, R: np.ndarray) -> np.ndarray:
        """Samples of sum_{|k_i| <= k_max} a_k(R) e^{ik.xi} on the family grid."""
        n, K = self.grid_n, self.k_max
        full = np.zeros((3, n, n, n), dtype=complex)
        idx = np.arange(-K, K + 1) % n
        full[(slice(None),) + np.ix_(idx, idx, idx)] = self.table_vectors(R)
        return transform_inverse(full)

    def truncation_error(self, R: np.ndarray) -> float:
        """sum of |a_k(R)| over the modes outside the table (sup-norm bound)."""
        n, K = self.grid_n, self.k_max
        full = transform_forward(self.W_samples(R, n))
        kept = np.zeros((n, n, n), dtype=bool)
        idx = np.arange(-K, K + 1) % n
        kept[np.ix_(idx, idx, idx)] = True
        return float(np.sum(np.linalg.norm(full, axis=0)[~kept]))

    # continuum realization

    def continuum_profile(self, j: int, xi: np.ndarray) -> np.ndarray:
        """phi_j(xi) = c_n Delta_perp B at arbitrary phases xi of shape (3, ...)."""
        _, s2 = geometry.transverse_offset(xi, self.offsets[j], DIRECTIONS[j])
        return self.normalization * geometry.bump_laplacian(s2, self.radius, self.bump_order)

    def continuum_potential(self, j: int, xi: np.ndarray) -> np.ndarray:
        """U_j(xi) = -c_n grad B x k_j, so that curl U_j = phi_j k_j."""
        perp, s2 = geometry.transverse_offset(xi, self.offsets[j], DIRECTIONS[j])
        grad_b = geometry.bump_gradient_factor(s2, self.radius, self.bump_order) * perp
        d = DIRECTIONS[j].astype(float)
        shape = (3,) + (1,) * (xi.ndim - 1)
        return -self.normalization * np.cross(grad_b, d.reshape(shape), axis=0)

    # table realization of the continuum profiles

    def _plane_table(self, j: int, bound: int) -> Tuple[np.ndarray, np.ndarray]:
        """Modes k _|_ k_j with |k_i| <= bound and s(k) = c_n |k_j| B_hat(|k|) / (4 pi^2)."""
        modes = geometry.plane_modes(DIRECTIONS[j], bound)
        kappa = np.linalg.norm(modes, axis=1)
        scale = self.normalization / geometry.CELL_AREA
        return modes, scale * geometry.bump_transform(kappa, self.radius, self.bump_order)

    def _plane_series(
        self,
        j: int,
        xi: np.ndarray,
        amplitudes: np.ndarray,
        modes: np.ndarray,
        wave: Callable[[np.ndarray], np.ndarray],
    ) -> np.ndarray:
        """sum_k amplitudes[k] wave(k . (xi - x_j)) over the given modes, chunked."""
        xi = np.asarray(xi, dtype=float)
        y = (xi - self.offsets[j].reshape((3,) + (1,) * (xi.ndim - 1))).reshape(3, -1)
        out = np.zeros((amplitudes.shape[1], y.shape[1]))
        chunk = max(1, TABLE_CHUNK // max(y.shape[1], 1))
        for start in range(0, len(modes), chunk):
            phase = modes[start : start + chunk].astype(float) @ y
            out += amplitudes[start : start + chunk].T @ wave(phase)
        return out.reshape((amplitudes.shape[1],) + xi.shape[1:])

    def table_profile(self, j: int, xi: np.ndarray, k_max: Optional[int] = None) -> np.ndarray:
        """phi_j(xi) summed over its Fourier modes with |k_i| <= k_max (the table range)."""
        modes, s = self._plane_table(j, k_max or self.k_max)
        amplitudes = (-np.sum(modes**2, axis=1) * s)[:, None]
        return self._plane_series(j, xi, amplitudes, modes, np.cos)[0]

    def table_potential(self, j: int, xi: np.ndarray, k_max: Optional[int] = None) -> np.ndarray:
        """U_j(xi) summed over the Fourier modes of phi_j k_j with |k_i| <= k_max."""
        modes, s = self._plane_table(j, k_max or self.k_max)
        amplitudes = s[:, None] * np.cross(modes, DIRECTIONS[j])
        return self._plane_series(j, xi, amplitudes, modes, np.sin)

    def potential_truncation_error(
        self, j: int, k_max: Optional[int] = None, reach: int = 4
    ) -> float:
        """
        sup-norm bound of U_j minus its table sum: the sum of |U_hat_k| over the modes
        with k_max < max|k_i| <= reach * k_max.
        """
        K = k_max or self.k_max
        modes, s = self._plane_table(j, reach * K)
        outside = np.max(np.abs(modes), axis=1) > K
        sizes = np.abs(s) * np.linalg.norm(np.cross(modes, DIRECTIONS[j]), axis=1)
        return float(np.sum(sizes[outside]))

    def profile_transform(self, kappa: np.ndarray) -> np.ndarray:
        return geometry.profile_transform(kappa, self.radius, self.bump_order)

    def gamma_max(self) -> float:
        """Largest Gamma_j over the admissibility gate."""
        c_max = 0.25 + self.gate * float(np.max(geometry.dual_frobenius_norms()))
        return math.sqrt(c_max)

    def c_hat(self, m: int = 5) -> float:
        """sup_kappa kappa^m |a_hat(kappa)| over the gate (zeroth R-derivative)."""
        kappa = np.geomspace(1e-2, 1e4, 20001)
        sup = float(np.max(kappa**m * self.profile_transform(kappa)))
        return self.gamma_max() * math.sqrt(2.0) * sup

    def decay_fit(self, bands: Sequence[int] = DECAY_BANDS) -> Tuple[float, np.ndarray]:
        """
        Fitted decay exponent of the continuum profile coefficients.

        Returns:
            (exponent, shell maxima over [K, 2K) for each band K)
        """
        if len(bands) < 3:
            raise ValueError("decay fit needs at least three bands")
        maxima = []
        for K in bands:
            kappa = np.linspace(K, 2 * K, 4096, endpoint=False)
            maxima.append(float(np.max(self.profile_transform(kappa))))
        slope = np.polyfit(np.log(bands), np.log(maxima), 1)[0]
        return float(-slope), np.array(maxima)

    # persistence

    def to_dict(self) -> Dict[str, Any]:
        return {
            'directions': DIRECTIONS.tolist(),
            'offsets': self.offsets.tolist(),
            'radius': self.radius,
            'bump_order': self.bump_order,
            'k_max': self.k_max,
            'grid_n': self.grid_n,
            'seed': self.seed,
            'min_distance': self.min_distance,
            'admissible_radius': self.admissible_radius,
            'gate': self.gate,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MikadoFamily":
        return cls(
            offsets=np.array(data['offsets']),
            radius=data['radius'],
            bump_order=data['bump_order'],
            k_max=data['k_max'],
            grid_n=data['grid_n'],
            seed=data['seed'],
            min_distance=data.get('min_distance'),
        )

    def __repr__(self) -> str:
        return (
            f"MikadoFamily(r={self.radius}, p={self.bump_order}, k_max={self.k_max}, "
            f"min_distance={self.min_distance:.4f})"
        )


def build_family(
    radius: float,
    k_max: int = 16,
    seed: int = 7,
    grid_n: int = 64,
    bump_order: int = 6,
    trials: int = 4096,
) -> MikadoFamily:
    """
    Place six disjoint tubes by seeded search and build the family.

    Raises:
        PlacementError: if the best placement leaves tubes overlapping on the grid
    """
    dx = 2.0 * math.pi / grid_n
    required = 2.0 * radius + 2.0 * math.sqrt(3.0) * dx
    offsets, achieved = geometry.search_offsets(trials, seed)
    logger.info(
        f"Mikado placement: min line distance {achieved:.4f} (required {required:.4f})"
    )
    if achieved <= required:
        raise PlacementError(achieved, required)
    family = MikadoFamily(
        offsets, radius, bump_order=bump_order, k_max=k_max, grid_n=grid_n, seed=seed,
        min_distance=achieved,
    )
    logger.info(f"Built {family}; admissible radius {family.admissible_radius:.6f}")
    return family


DIVERGENCE_TOLERANCE = 1e-9
MEAN_TOLERANCE = 1e-10
MOMENT_TOLERANCE = 1e-6
ORTHOGONALITY_TOLERANCE = 1e-12
DECAY_THRESHOLD = 4.0


def random_admissible(family: MikadoFamily, count: int, seed: int = 0) -> np.ndarray:
    """``count`` symmetric matrices Id + E with |E| below 0.9 of the gate."""
    rng = np.random.default_rng(seed)
    E = rng.normal(size=(count, 3, 3))
    E = 0.5 * (E + np.transpose(E, (0, 2, 1)))
    E /= np.linalg.norm(E, axis=(1, 2))[:, None, None]
    radii = rng.uniform(0.0, 0.9 * family.gate, size=count)
    return np.eye(3)[None] + radii[:, None, None] * E


def verify_family(
    family: MikadoFamily,
    samples: int = 100,
    seed: int = 0,
    monitor: Optional[GateMonitor] = None,
) -> Dict[str, float]:
    """
    Measure the structural identities of the family on its own grid.

    Returns:
        Largest violation of each identity, the fitted decay exponent and the
        certified minimal weight
    """
    grid = Grid(family.grid_n)
    identity = np.eye(3)
    W = family.evaluate_W(identity, grid)
    k = np.stack(
        np.meshgrid(*(np.arange(-family.k_max, family.k_max + 1),) * 3, indexing='ij')
    ).astype(float)

    moment_error = float(np.max(np.abs(family.second_moment(identity) - identity)))
    orthogonality = float(np.max(np.abs(np.sum(family.table_vectors(identity) * k, axis=0))))
    for R in random_admissible(family, samples, seed):
        moment_error = max(
            moment_error, float(np.max(np.abs(family.second_moment(R) - R)))
        )
        orthogonality = max(
            orthogonality, float(np.max(np.abs(np.sum(family.table_vectors(R) * k, axis=0))))
        )
    decay, _ = family.decay_fit()
    measured = {
        'mikado_div_W': float(np.max(np.abs(div(W).coeffs))),
        'mikado_div_WW': float(np.max(np.abs(div(sym_outer(W, W, dealias=False)).coeffs))),
        'mikado_mean_W': float(np.max(np.abs(W.coeffs[:, 0, 0, 0]))),
        'mikado_second_moment': moment_error,
        'mikado_orthogonality': orthogonality,
        'mikado_decay_exponent': decay,
        'mikado_min_weight': family.certify_radius(seed=seed),
    }
    if monitor is not None:
        monitor.context(step='mikado')
        monitor.check('mikado_div_W', measured['mikado_div_W'], DIVERGENCE_TOLERANCE)
        monitor.check('mikado_div_WW', measured['mikado_div_WW'], DIVERGENCE_TOLERANCE)
        monitor.check('mikado_mean_W', measured['mikado_mean_W'], MEAN_TOLERANCE)
        monitor.check('mikado_second_moment', moment_error, MOMENT_TOLERANCE)
        monitor.check('mikado_orthogonality', orthogonality, ORTHOGONALITY_TOLERANCE)
        monitor.monitor('mikado_decay_exponent', DECAY_THRESHOLD, decay)
        monitor.report('mikado_min_weight', measured['mikado_min_weight'])
    logger.info(
        f"Mikado family verified: second moment error {moment_error:.2e}, decay {decay:.2f}"
    )
    return measured
