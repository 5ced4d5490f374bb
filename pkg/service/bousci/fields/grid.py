"""
Uniform grid on the 2 pi periodic 3-torus and its wavenumber tables.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np

from bousci.core.errors import GridMismatchError


SIDE = 2.0 * math.pi


@dataclass(frozen=True)
class Grid:
    """
    n points per axis on [0, 2 pi)^3.

    Coefficients follow ``c = fftn(samples) / n^3``. The Nyquist plane is kept
    in storage (exact transform round trip) but its derivative wavenumber is
    zero, so derivative operators compose consistently.
    """

    n: int
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self) -> None:
        if self.n < 8 or self.n & (self.n - 1):
            raise GridMismatchError(f"grid size {self.n} must be a power of two >= 8")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise GridMismatchError(f"dealias fraction {self.dealias_fraction} not in (0, 1]")

    @property
    def side(self) -> float:
        return SIDE

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def dx(self) -> float:
        return SIDE / self.n

    @property
    def padded_n(self) -> int:
        """Size of the 3/2-padded product grid."""
        return 3 * self.n // 2

    @cached_property
    def axis(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    @cached_property
    def x(self) -> np.ndarray:
        """Coordinates, shape (3, n, n, n)."""
        return np.stack(np.meshgrid(self.axis, self.axis, self.axis, indexing='ij'))

    @cached_property
    def k_int(self) -> np.ndarray:
        """Signed integer wavenumbers along one axis (Nyquist as -n/2)."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).round().astype(int)

    @cached_property
    def k_deriv_axis(self) -> np.ndarray:
        """Derivative wavenumbers along one axis, Nyquist zeroed."""
        k = self.k_int.astype(float)
        k[self.n // 2] = 0.0
        return k

    @cached_property
    def k(self) -> np.ndarray:
        """Derivative wavenumber vectors, shape (3, n, n, n)."""
        kx = self.k_deriv_axis
        return np.stack(np.meshgrid(kx, kx, kx, indexing='ij'))

    @cached_property
    def k_lattice(self) -> np.ndarray:
        """Signed integer wavenumber vectors, shape (3, n, n, n)."""
        kx = self.k_int
        return np.stack(np.meshgrid(kx, kx, kx, indexing='ij'))

    @cached_property
    def k2(self) -> np.ndarray:
        return np.sum(self.k**2, axis=0)

    @cached_property
    def k2_safe(self) -> np.ndarray:
        """|k|^2 with zeros replaced by one (for inverse operators)."""
        return np.where(self.k2 == 0.0, 1.0, self.k2)

    @cached_property
    def zero_mode(self) -> np.ndarray:
        """Mask of modes without a derivative (k = 0 and pure Nyquist combinations)."""
        return self.k2 == 0.0

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True where any index sits on the Nyquist plane."""
        ny = np.zeros(self.n, dtype=bool)
        ny[self.n // 2] = True
        return ny[:, None, None] | ny[None, :, None] | ny[None, None, :]

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True for retained modes: all |k_i| < dealias_fraction * n / 2."""
        cut = self.dealias_fraction * self.n / 2.0
        keep = np.abs(self.k_int) < cut
        return keep[:, None, None] & keep[None, :, None] & keep[None, None, :]

    @cached_property
    def retained_index(self) -> np.ndarray:
        """FFT indices of the non-Nyquist modes."""
        return np.array([i for i in range(self.n) if i != self.n // 2])

    @cached_property
    def padded_index(self) -> np.ndarray:
        """Positions of ``retained_index`` modes inside the padded FFT array."""
        k = self.k_int[self.retained_index]
        return np.mod(k, self.padded_n)

    def check_same(self, other: "Grid") -> None:
        if self != other:
            raise GridMismatchError(f"grid mismatch: {self} vs {other}")
