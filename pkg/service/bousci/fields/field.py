"""
Truncated Fourier fields on the torus and time series of them.

A ``Field`` stores complex coefficients with a leading component axis:
1 for scalars, 3 for vectors and 6 for symmetric tensors (ordered
11, 12, 13, 22, 23, 33). Coefficient arrays are read-only once wrapped.
"""

import math
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from bousci.core.errors import GridMismatchError
from bousci.fields.grid import Grid


class Rank(Enum):
    """Tensor rank of a field, valued by its stored component count."""

    SCALAR = 1
    VECTOR = 3
    SYM_TENSOR = 6


SYM_PAIRS: Tuple[Tuple[int, int], ...] = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
SYM_INDEX = np.array([[0, 1, 2], [1, 3, 4], [2, 4, 5]])
DIAGONAL = (0, 3, 5)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


# Transforms -------------------------------------------------------------------

def transform_forward(samples: np.ndarray, n: Optional[int] = None) -> np.ndarray:
    """Coefficients of real samples over the last three axes (fftn / N^3)."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim < 3 or len(set(samples.shape[-3:])) != 1:
        raise GridMismatchError(f"samples of shape {samples.shape} are not cubic")
    if n is not None and samples.shape[-1] != n:
        raise GridMismatchError(f"samples have size {samples.shape[-1]}, grid expects {n}")
    size = samples.shape[-1]
    return np.fft.fftn(samples, axes=(-3, -2, -1)) / size**3


def transform_inverse(coeffs: np.ndarray) -> np.ndarray:
    """Real samples of coefficient arrays (inverse of ``transform_forward``)."""
    size = coeffs.shape[-1]
    return np.real(np.fft.ifftn(coeffs, axes=(-3, -2, -1))) * size**3


def to_physical(grid: Grid, coeffs: np.ndarray, dealias: bool = True) -> np.ndarray:
    """
    Samples on the product grid.

    With ``dealias`` the retained (non-Nyquist) modes are placed into a
    3/2-padded spectrum so products formed there are exact after projection.
    """
    if not dealias:
        return transform_inverse(coeffs)
    m = grid.padded_n
    idx_n = np.ix_(grid.retained_index, grid.retained_index, grid.retained_index)
    idx_m = np.ix_(grid.padded_index, grid.padded_index, grid.padded_index)
    padded = np.zeros(coeffs.shape[:-3] + (m, m, m), dtype=complex)
    padded[(Ellipsis,) + idx_m] = coeffs[(Ellipsis,) + idx_n]
    return transform_inverse(padded)


def to_spectral(grid: Grid, physical: np.ndarray, dealias: bool = True) -> np.ndarray:
    """Project product-grid samples back to n-grid coefficients (Nyquist zeroed)."""
    if not dealias:
        out = transform_forward(physical)
        out[..., grid.nyquist_mask] = 0.0
        return out
    full = transform_forward(physical)
    idx_n = np.ix_(grid.retained_index, grid.retained_index, grid.retained_index)
    idx_m = np.ix_(grid.padded_index, grid.padded_index, grid.padded_index)
    out = np.zeros(physical.shape[:-3] + grid.shape, dtype=complex)
    out[(Ellipsis,) + idx_n] = full[(Ellipsis,) + idx_m]
    return out


# Field ------------------------------------------------------------------------

class Field:
    """Real field on the torus stored as Fourier coefficients."""

    __slots__ = ('grid', 'rank', 'coeffs')

    def __init__(self, grid: Grid, rank: Rank, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=complex)
        expected = (rank.value,) + grid.shape
        if coeffs.shape != expected:
            raise GridMismatchError(f"coefficients {coeffs.shape} do not match {expected}")
        if coeffs.flags.writeable:
            coeffs = _frozen(coeffs.copy()) if coeffs.base is not None else _frozen(coeffs)
        self.grid = grid
        self.rank = rank
        self.coeffs = coeffs

    # construction

    @classmethod
    def zeros(cls, grid: Grid, rank: Rank = Rank.SCALAR) -> "Field":
        return cls(grid, rank, np.zeros((rank.value,) + grid.shape, dtype=complex))

    @classmethod
    def from_samples(cls, grid: Grid, samples: np.ndarray, rank: Optional[Rank] = None) -> "Field":
        """Wrap real samples; rank inferred from the leading axis when omitted."""
        samples = np.asarray(samples, dtype=float)
        if samples.ndim == 3:
            samples = samples[None]
        if rank is None:
            rank = {1: Rank.SCALAR, 3: Rank.VECTOR, 6: Rank.SYM_TENSOR}.get(samples.shape[0])
            if rank is None:
                raise GridMismatchError(f"cannot infer rank from shape {samples.shape}")
        return cls(grid, rank, transform_forward(samples, grid.n))

    @classmethod
    def from_full_tensor(cls, grid: Grid, full: np.ndarray) -> "Field":
        """Symmetric tensor from (3, 3, n, n, n) samples (upper triangle is used)."""
        comps = np.stack([full[i, j] for i, j in SYM_PAIRS])
        return cls.from_samples(grid, comps, Rank.SYM_TENSOR)

    @classmethod
    def scalar(cls, grid: Grid, samples: np.ndarray) -> "Field":
        return cls.from_samples(grid, samples, Rank.SCALAR)

    @classmethod
    def vector(cls, grid: Grid, samples: np.ndarray) -> "Field":
        return cls.from_samples(grid, samples, Rank.VECTOR)

    # access

    def samples(self) -> np.ndarray:
        """Real samples, shape (components, n, n, n)."""
        return transform_inverse(self.coeffs)

    def values(self) -> np.ndarray:
        """Samples without the component axis for scalars."""
        s = self.samples()
        return s[0] if self.rank is Rank.SCALAR else s

    def full(self) -> np.ndarray:
        """(3, 3, n, n, n) samples of a symmetric tensor."""
        if self.rank is not Rank.SYM_TENSOR:
            raise GridMismatchError("full() is only defined for symmetric tensors")
        s = self.samples()
        return s[SYM_INDEX]

    def full_coeffs(self) -> np.ndarray:
        if self.rank is not Rank.SYM_TENSOR:
            raise GridMismatchError("full_coeffs() is only defined for symmetric tensors")
        return self.coeffs[SYM_INDEX]

    def component(self, i: int) -> "Field":
        return Field(self.grid, Rank.SCALAR, self.coeffs[i : i + 1].copy())

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        """Conjugate symmetry c(-k) = conj(c(k)) on non-Nyquist modes."""
        flipped = np.roll(self.coeffs[:, ::-1, ::-1, ::-1], 1, axis=(1, 2, 3))
        diff = (self.coeffs - np.conj(flipped))[(slice(None),) + (~self.grid.nyquist_mask,)]
        return bool(np.max(np.abs(diff), initial=0.0) <= tol)

    def with_coeffs(self, coeffs: np.ndarray, rank: Optional[Rank] = None) -> "Field":
        return Field(self.grid, rank or self.rank, coeffs)

    # arithmetic

    def _check(self, other: "Field") -> None:
        self.grid.check_same(other.grid)
        if self.rank is not other.rank:
            raise GridMismatchError(f"rank mismatch: {self.rank} vs {other.rank}")

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __neg__(self) -> "Field":
        return self.with_coeffs(-self.coeffs)

    def __mul__(self, scalar: float) -> "Field":
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "Field":
        return self.with_coeffs(self.coeffs / scalar)

    def __repr__(self) -> str:
        return f"Field(rank={self.rank.name}, n={self.grid.n})"


def dealias(field: Field) -> Field:
    """Zero every mode with some |k_i| >= dealias_fraction * n / 2."""
    return field.with_coeffs(field.coeffs * field.grid.dealias_mask)


def stack_scalars(fields: Sequence[Field], rank: Rank) -> Field:
    """Assemble vector/tensor components from scalar fields."""
    grid = fields[0].grid
    return Field(grid, rank, np.concatenate([f.coeffs for f in fields], axis=0))


# Products ---------------------------------------------------------------------

def product_coeffs(
    grid: Grid, a: np.ndarray, b: np.ndarray, dealias: bool = True
) -> np.ndarray:
    """Coefficients of the pointwise product of two broadcastable coefficient arrays."""
    return to_spectral(grid, to_physical(grid, a, dealias) * to_physical(grid, b, dealias), dealias)


def multiply(f: Field, g: Field, dealias: bool = True) -> Field:
    """Scalar times field (any rank); both scalars gives a scalar."""
    f.grid.check_same(g.grid)
    if f.rank is not Rank.SCALAR:
        f, g = g, f
    if f.rank is not Rank.SCALAR:
        raise GridMismatchError("multiply needs at least one scalar operand")
    return Field(f.grid, g.rank, product_coeffs(f.grid, f.coeffs, g.coeffs, dealias))


def sym_outer(f: Field, g: Field, dealias: bool = True) -> Field:
    """Symmetrized outer product (f (x) g + g (x) f) / 2 of two vector fields."""
    f.grid.check_same(g.grid)
    grid = f.grid
    pf = to_physical(grid, f.coeffs, dealias)
    pg = pf if g is f else to_physical(grid, g.coeffs, dealias)
    comps = np.stack([0.5 * (pf[i] * pg[j] + pf[j] * pg[i]) for i, j in SYM_PAIRS])
    return Field(grid, Rank.SYM_TENSOR, to_spectral(grid, comps, dealias))


def dot(f: Field, g: Field, dealias: bool = True) -> Field:
    """Pointwise inner product of two vector fields."""
    f.grid.check_same(g.grid)
    pf = to_physical(f.grid, f.coeffs, dealias)
    pg = pf if g is f else to_physical(f.grid, g.coeffs, dealias)
    return Field(f.grid, Rank.SCALAR, to_spectral(f.grid, np.sum(pf * pg, axis=0)[None], dealias))


# Time series ------------------------------------------------------------------

class TimeSeriesField:
    """
    Fields sampled on the uniform time grid t0, t0 + dt, ..., t1.

    Coefficients are held in one array of shape (nt, components, n, n, n).
    Values between samples use four-point cubic interpolation in time.
    """

    INTERPOLATION_ORDER = 3

    def __init__(
        self, grid: Grid, rank: Rank, t0: float, dt: float, coeffs: np.ndarray
    ):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim != 5 or coeffs.shape[1:] != (rank.value,) + grid.shape:
            raise GridMismatchError(f"series coefficients {coeffs.shape} do not match {rank}")
        if coeffs.shape[0] > 1 and dt <= 0.0:
            raise GridMismatchError(f"time step {dt} must be positive")
        if coeffs.flags.writeable:
            coeffs.setflags(write=False)
        self.grid = grid
        self.rank = rank
        self.t0 = float(t0)
        self.dt = float(dt)
        self.coeffs = coeffs

    @classmethod
    def from_fields(cls, fields: Sequence[Field], t0: float, dt: float) -> "TimeSeriesField":
        if not fields:
            raise GridMismatchError("empty time series")
        grid, rank = fields[0].grid, fields[0].rank
        for f in fields:
            grid.check_same(f.grid)
            if f.rank is not rank:
                raise GridMismatchError("mixed ranks in time series")
        return cls(grid, rank, t0, dt, np.stack([f.coeffs for f in fields]))

    @classmethod
    def zeros(cls, grid: Grid, rank: Rank, t0: float, dt: float, count: int) -> "TimeSeriesField":
        return cls(grid, rank, t0, dt, np.zeros((count, rank.value) + grid.shape, dtype=complex))

    def __len__(self) -> int:
        return self.coeffs.shape[0]

    @property
    def t1(self) -> float:
        return self.t0 + (len(self) - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    def snapshot(self, i: int) -> Field:
        return Field(self.grid, self.rank, self.coeffs[i])

    def __iter__(self):  # type: ignore[no-untyped-def]
        for i in range(len(self)):
            yield self.snapshot(i)

    def samples(self) -> np.ndarray:
        """Real samples, shape (nt, components, n, n, n)."""
        return transform_inverse(self.coeffs)

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Index of the stored sample at time t."""
        i = int(round((t - self.t0) / self.dt)) if self.dt > 0 else 0
        if not 0 <= i < len(self) or abs(self.t0 + i * self.dt - t) > tol * max(1.0, abs(t)):
            raise GridMismatchError(f"time {t} is not a stored sample")
        return i

    def coeffs_at(self, t: float) -> np.ndarray:
        """Coefficients at time t by cubic Lagrange interpolation of nearby samples."""
        nt = len(self)
        if nt == 1:
            return self.coeffs[0]
        s = (t - self.t0) / self.dt
        if s < -1e-9 or s > nt - 1 + 1e-9:
            raise GridMismatchError(f"time {t} outside [{self.t0}, {self.t1}]")
        i = int(round(s))
        if abs(s - i) < 1e-12:
            return self.coeffs[i]
        npts = min(4, nt)
        start = min(max(int(math.floor(s)) - 1, 0), nt - npts)
        nodes = np.arange(start, start + npts, dtype=float)
        weights = np.ones(npts)
        for a in range(npts):
            for b in range(npts):
                if a != b:
                    weights[a] *= (s - nodes[b]) / (nodes[a] - nodes[b])
        return np.tensordot(weights, self.coeffs[start : start + npts], axes=(0, 0))

    def at(self, t: float) -> Field:
        return Field(self.grid, self.rank, self.coeffs_at(t))

    def map(self, fn: Callable[[Field], Field]) -> "TimeSeriesField":
        """Apply ``fn`` to every snapshot."""
        return TimeSeriesField.from_fields([fn(f) for f in self], self.t0, self.dt)

    def window(self, start: int, stop: int) -> "TimeSeriesField":
        """Samples start..stop-1 as a new series."""
        return TimeSeriesField(
            self.grid, self.rank, self.t0 + start * self.dt, self.dt,
            self.coeffs[start:stop].copy(),
        )

    def __add__(self, other: "TimeSeriesField") -> "TimeSeriesField":
        self._check(other)
        return TimeSeriesField(self.grid, self.rank, self.t0, self.dt, self.coeffs + other.coeffs)

    def __sub__(self, other: "TimeSeriesField") -> "TimeSeriesField":
        self._check(other)
        return TimeSeriesField(self.grid, self.rank, self.t0, self.dt, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "TimeSeriesField":
        return TimeSeriesField(self.grid, self.rank, self.t0, self.dt, self.coeffs * scalar)

    __rmul__ = __mul__

    def _check(self, other: "TimeSeriesField") -> None:
        self.grid.check_same(other.grid)
        if other.rank is not self.rank or len(other) != len(self) or other.t0 != self.t0:
            raise GridMismatchError("time series do not share rank and time grid")

    def resample(self, dt: float) -> "TimeSeriesField":
        """Cubic resampling onto a finer grid over [t0, t1]."""
        count = int(math.floor((self.t1 - self.t0) / dt + 1e-9)) + 1
        times = self.t0 + dt * np.arange(count)
        return TimeSeriesField(
            self.grid, self.rank, self.t0, dt, np.stack([self.coeffs_at(t) for t in times])
        )

    def __repr__(self) -> str:
        return (
            f"TimeSeriesField(rank={self.rank.name}, n={self.grid.n}, "
            f"t=[{self.t0:.4g}, {self.t1:.4g}], samples={len(self)})"
        )


def series_from_function(
    grid: Grid, rank: Rank, times: np.ndarray, fn: Callable[[float], Union[Field, np.ndarray]]
) -> TimeSeriesField:
    """Sample ``fn(t)`` (a Field or raw samples) on uniform ``times``."""
    fields: List[Field] = []
    for t in times:
        value = fn(float(t))
        fields.append(value if isinstance(value, Field) else Field.from_samples(grid, value, rank))
    dt = float(times[1] - times[0]) if len(times) > 1 else 0.0
    return TimeSeriesField.from_fields(fields, float(times[0]), dt)
