"""
Norms on the torus: L2, homogeneous Sobolev, grid Hölder estimates.

Integrals are taken over [0, 2 pi]^3, so ||sin x3||_{L2} = sqrt(4 pi^3).
``mean`` is the space average (the k = 0 coefficient); ``integral`` is
8 pi^3 times it.
"""

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, List, Tuple, Union

import numpy as np

from bousci.fields.field import DIAGONAL, Field, Rank, TimeSeriesField, transform_inverse


VOLUME = (2.0 * math.pi) ** 3


@dataclass(frozen=True)
class NormEstimate:
    """A grid norm estimate; ``resolved`` is False when the field is under-resolved."""

    value: float
    resolved: bool = True

    def __float__(self) -> float:
        return self.value


def _component_weights(rank: Rank) -> np.ndarray:
    if rank is Rank.SYM_TENSOR:
        w = np.full(6, 2.0)
        w[list(DIAGONAL)] = 1.0
        return w
    return np.ones(rank.value)


def l2_norm(field: Field) -> float:
    """||f||_{L2} (Frobenius for tensors)."""
    w = _component_weights(field.rank)
    total = np.sum(w[:, None, None, None] * np.abs(field.coeffs) ** 2)
    return float(math.sqrt(VOLUME * total))


def sobolev_norm(field: Field, s: float) -> float:
    """||f||_{H^s-dot}: sum over k != 0 of |f_k|^2 |k|^{2s}."""
    grid = field.grid
    w = _component_weights(field.rank)
    weight = np.where(grid.zero_mode, 0.0, grid.k2_safe**s)
    total = np.sum(w[:, None, None, None] * np.abs(field.coeffs) ** 2 * weight)
    return float(math.sqrt(VOLUME * total))


def mean(field: Field) -> Union[float, np.ndarray]:
    """Space average; a float for scalars, a component array otherwise."""
    m = np.real(field.coeffs[:, 0, 0, 0])
    return float(m[0]) if field.rank is Rank.SCALAR else m.copy()


def integral(field: Field) -> Union[float, np.ndarray]:
    """Integral over the torus."""
    return mean(field) * VOLUME


def pointwise_magnitude(samples: np.ndarray, rank: Rank) -> np.ndarray:
    """|f(x)| per grid point: absolute value, Euclidean or Frobenius norm."""
    if rank is Rank.SCALAR:
        return np.abs(samples[0])
    w = _component_weights(rank)
    return np.sqrt(np.tensordot(w, samples**2, axes=(0, 0)))


def sup_norm(field: Field) -> float:
    """max over grid points of |f|."""
    return float(np.max(pointwise_magnitude(field.samples(), field.rank)))


def _multi_indices(order: int) -> Iterator[Tuple[int, int, int]]:
    for g in itertools.product(range(order + 1), repeat=3):
        if sum(g) == order:
            yield g


def _derivative_samples(field: Field, gamma: Tuple[int, int, int]) -> np.ndarray:
    symbol = np.ones(field.grid.shape, dtype=complex)
    for axis, g in enumerate(gamma):
        if g:
            symbol = symbol * (1j * field.grid.k[axis]) ** g
    return transform_inverse(field.coeffs * symbol)


def _is_resolved(field: Field, order: int) -> bool:
    grid = field.grid
    if order > grid.n // 4:
        return False
    total = float(np.sum(np.abs(field.coeffs) ** 2))
    if total == 0.0:
        return True
    tail = float(np.sum(np.abs(field.coeffs[:, ~grid.dealias_mask]) ** 2))
    return tail <= 1e-16 * total


def holder_seminorm(field: Field, order: float) -> float:
    """
    [f]_{m+a} estimated on the dyadic stencil h = dx * 2^j along each axis.

    For integer order this is max_{|gamma|=m} sup |D^gamma f|.
    """
    m = int(math.floor(order))
    frac = order - m
    grid = field.grid
    best = 0.0
    for gamma in _multi_indices(m):
        d = _derivative_samples(field, gamma)
        if frac == 0.0:
            best = max(best, float(np.max(pointwise_magnitude(d, field.rank))))
            continue
        shift = 1
        while shift <= grid.n // 2:
            h = shift * grid.dx
            for axis in (1, 2, 3):
                diff = np.roll(d, -shift, axis=axis) - d
                q = float(np.max(pointwise_magnitude(diff, field.rank))) / h**frac
                best = max(best, q)
            shift *= 2
    return best


def holder_norm(field: Field, order: float) -> NormEstimate:
    """
    ||f||_{m+a} = sum_{k <= m} max_{|gamma|=k} sup|D^gamma f| + [f]_{m+a}.

    Args:
        field: Real field of any rank
        order: Nonnegative Hölder order m + a

    Returns:
        NormEstimate with ``resolved`` False when the order exceeds n/4 or the
        field carries energy beyond the dealiasing cutoff
    """
    m = int(math.floor(order))
    value = sum(holder_seminorm(field, k) for k in range(m + 1))
    if order - m > 0.0:
        value += holder_seminorm(field, order)
    return NormEstimate(float(value), _is_resolved(field, m + 1))


def series_max(series: TimeSeriesField, norm: Callable[[Field], float]) -> float:
    """max over stored samples of ``norm``."""
    return max(float(norm(f)) for f in series)


def series_values(series: TimeSeriesField, norm: Callable[[Field], float]) -> List[float]:
    return [float(norm(f)) for f in series]
