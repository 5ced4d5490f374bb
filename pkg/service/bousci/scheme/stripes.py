"""
Time cutoffs of the scheme.

``GluePartition`` is the partition of unity chi_i used to glue local Euler
solutions; ``StripeFamily`` holds the squiggling stripes
eta_i(t, x) = phi((t - t_i) / tau - h(x_3)) that localize the perturbation.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Tuple

import numpy as np

from bousci.core.errors import ConfigurationError
from bousci.core.params import TORUS_VOLUME


logger = logging.getLogger(__name__)

# phi = 1 on [PLATEAU_START, PLATEAU_END], supported in (SUPPORT_START, SUPPORT_END)
SUPPORT_START = 1.0 / 24.0
PLATEAU_START = 1.0 / 6.0
PLATEAU_END = 5.0 / 6.0
SUPPORT_END = 23.0 / 24.0
MAX_SHIFT = 1.0 / 6.0
DEFAULT_SHIFT = 1.0 / 8.0

DENSE_TIMES = 2001
DENSE_X3 = 1024


def _flat(u: np.ndarray) -> np.ndarray:
    """exp(-1/u) for u > 0, zero otherwise."""
    out = np.zeros_like(u)
    pos = u > 0.0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def smooth_step(u: Any) -> np.ndarray:
    """C-infinity step: 0 for u <= 0, 1 for u >= 1 (both exact)."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    f0, f1 = _flat(u), _flat(1.0 - u)
    return f0 / (f0 + f1)


def smooth_step_derivative(u: Any) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    inside = (u > 0.0) & (u < 1.0)
    out = np.zeros_like(u)
    ui = u[inside]
    f0, f1 = np.exp(-1.0 / ui), np.exp(-1.0 / (1.0 - ui))
    out[inside] = (f0 / ui**2 * f1 + f0 * f1 / (1.0 - ui) ** 2) / (f0 + f1) ** 2
    return out


@dataclass(frozen=True)
class GluePartition:
    """
    Nodes t_i = i tau on [0, horizon] with cutoffs chi_i.

    chi_i = 1 on J_i = [t_i - tau/3, t_i + tau/3], falls to zero across
    I_i = [t_i + tau/3, t_i + 2 tau/3]; chi_0 = 1 before t_0 and chi_m = 1 after t_m.
    """

    tau: float
    horizon: float

    @property
    def m(self) -> int:
        return int(math.floor(self.horizon / self.tau + 1e-9))

    @property
    def nodes(self) -> np.ndarray:
        return self.tau * np.arange(self.m + 1)

    def _u_rise(self, i: int, t: np.ndarray) -> np.ndarray:
        third = self.tau / 3.0
        return (t - i * self.tau + 2.0 * third) / third

    def _u_fall(self, i: int, t: np.ndarray) -> np.ndarray:
        third = self.tau / 3.0
        return (t - i * self.tau - third) / third

    def chi(self, i: int, t: Any) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        ti = i * self.tau
        rise = np.ones_like(t) if i == 0 else smooth_step(self._u_rise(i, t))
        fall = np.ones_like(t) if i == self.m else 1.0 - smooth_step(self._u_fall(i, t))
        return np.where(t <= ti, rise, fall)

    def chi_derivative(self, i: int, t: Any) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        ti = i * self.tau
        third = self.tau / 3.0
        zero = np.zeros_like(t)
        rise = zero if i == 0 else smooth_step_derivative(self._u_rise(i, t)) / third
        fall = zero if i == self.m else -smooth_step_derivative(self._u_fall(i, t)) / third
        return np.where(t <= ti, rise, fall)

    def active(self, t: float) -> Tuple[int, ...]:
        """Indices with chi_i(t) > 0 (one on J_i, two on I_i)."""
        i = int(math.floor(t / self.tau))
        candidates = [j for j in (i - 1, i, i + 1, i + 2) if 0 <= j <= self.m]
        return tuple(j for j in candidates if float(self.chi(j, t)) > 0.0)

    def in_plateau(self, i: int, t: float) -> bool:
        return float(self.chi(i, t)) == 1.0

    def window(self, i: int) -> Tuple[float, float]:
        """[t_i - tau, t_i + tau] clipped to [0, horizon]."""
        ti = i * self.tau
        return max(0.0, ti - self.tau), min(self.horizon, ti + self.tau)

    def to_dict(self) -> Dict[str, Any]:
        return {'tau': self.tau, 'horizon': self.horizon, 'm': self.m}


def build_partition(tau: float, horizon: float, dt: float) -> GluePartition:
    """
    Raises:
        ConfigurationError: if tau is shorter than four sample spacings
    """
    if tau < 4.0 * dt * (1.0 - 1e-12):
        raise ConfigurationError(f"tau={tau:.4g} below 4 dt={4 * dt:.4g}", "tau_q >= 4 dt")
    partition = GluePartition(tau=float(tau), horizon=float(horizon))
    logger.debug(f"Partition: tau={tau:.4g}, nodes 0..{partition.m}")
    return partition


def stripe_profile(s: Any) -> np.ndarray:
    """1-periodic time profile phi restricted to one period [0, 1)."""
    s = np.asarray(s, dtype=float)
    up = smooth_step((s - SUPPORT_START) / (PLATEAU_START - SUPPORT_START))
    down = smooth_step((SUPPORT_END - s) / (SUPPORT_END - PLATEAU_END))
    return np.where(s < 0.5, up, down)


def stripe_constant(shift: float = DEFAULT_SHIFT, times: int = DENSE_TIMES) -> float:
    """
    min over s of sum_{j in Z} int phi(s - j - h(x_3))^2 dx for an unbounded
    stripe train; independent of tau.
    """
    x3 = np.linspace(0.0, 2.0 * math.pi, DENSE_X3, endpoint=False)
    h = shift * np.sin(x3)
    s = np.linspace(0.0, 1.0, times, endpoint=False)
    total = np.zeros(times)
    for j in range(-2, 3):
        total += np.mean(stripe_profile(s[:, None] - j - h[None, :]) ** 2, axis=1)
    return float(TORUS_VOLUME * np.min(total))


@dataclass(frozen=True)
class StripeFamily:
    """eta_0 .. eta_m attached to a partition, with h(x_3) = shift sin x_3."""

    partition: GluePartition
    shift: float = DEFAULT_SHIFT

    @property
    def count(self) -> int:
        return self.partition.m + 1

    def eta(self, i: int, t: Any, x3: Any) -> np.ndarray:
        """eta_i at times t and heights x3 (broadcast)."""
        tau = self.partition.tau
        s = (np.asarray(t, dtype=float) - i * tau) / tau - self.shift * np.sin(x3)
        return stripe_profile(s)

    def support(self, i: int) -> Tuple[float, float]:
        """Closed time interval containing supp eta_i, clipped to [0, horizon]."""
        tau = self.partition.tau
        lo = i * tau + (SUPPORT_START - self.shift) * tau
        hi = i * tau + (SUPPORT_END + self.shift) * tau
        return max(0.0, lo), min(self.partition.horizon, hi)

    def mass(self, t: Any, axis: np.ndarray) -> np.ndarray:
        """sum_i int eta_i(t)^2 dx, the x_3 integral taken as the mean over ``axis``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        total = np.zeros(t.shape)
        for i in range(self.count):
            total += np.mean(self.eta(i, t[:, None], axis[None, :]) ** 2, axis=1)
        return TORUS_VOLUME * total

    @cached_property
    def c0(self) -> float:
        """min over [0, horizon] of the squared stripe mass (dense sampling)."""
        t = np.linspace(0.0, self.partition.horizon, DENSE_TIMES)
        axis = np.linspace(0.0, 2.0 * math.pi, DENSE_X3, endpoint=False)
        return float(np.min(self.mass(t, axis)))

    def to_dict(self) -> Dict[str, Any]:
        return {'shift': self.shift, 'count': self.count, 'c0': self.c0}


def build_stripes(partition: GluePartition, shift: float = DEFAULT_SHIFT) -> StripeFamily:
    """
    Raises:
        ConfigurationError: if the shift breaks eta_i = 1 on I_i or c0 <= 0
    """
    if not 0.0 < shift <= MAX_SHIFT:
        raise ConfigurationError(f"stripe shift {shift} out of range", "0 < h_0 <= 1/6")
    stripes = StripeFamily(partition=partition, shift=float(shift))
    if stripes.c0 <= 0.0:
        raise ConfigurationError(f"stripe mass vanishes (c0={stripes.c0:.3g})", "c0 > 0")
    logger.info(f"Stripes: {stripes.count} cutoffs, shift {shift:.4g}, c0={stripes.c0:.4g}")
    return stripes
