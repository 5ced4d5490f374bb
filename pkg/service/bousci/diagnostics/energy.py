"""
Energy functionals of a stage.

    E(t)   = 1/2 ||v(t)||^2 - int_0^t int theta v_3
    M(t)   = 1/2 ||theta(t)||^2 + int_0^t ||grad theta||^2
    gap(t) = e(t) - ||v(t)||^2

Time integrals use the trapezoid rule on the stored grid unless the stage
carries its own accumulated dissipation.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid

from bousci.core.params import ProblemData
from bousci.fields.norms import VOLUME
from bousci.scheme.stage import Stage


QUADRATURE = 'trapezoid'


@dataclass
class EnergyFunctionals:
    """E, M and the energy gap at every stored sample."""

    times: np.ndarray
    E: np.ndarray
    M: np.ndarray
    gap: np.ndarray
    kinetic: np.ndarray
    quadrature: str = QUADRATURE

    @property
    def E_drift(self) -> float:
        return float(np.max(np.abs(self.E - self.E[0])))

    @property
    def M_relative_drift(self) -> float:
        if self.M[0] == 0.0:
            return float(np.max(np.abs(self.M)))
        return float(np.max(np.abs(self.M - self.M[0])) / abs(self.M[0]))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {'t': self.times, 'E': self.E, 'M': self.M, 'gap': self.gap, 'kinetic': self.kinetic}
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            'quadrature': self.quadrature,
            'E_drift': self.E_drift,
            'M_relative_drift': self.M_relative_drift,
            'gap_min': float(np.min(self.gap)),
            'gap_max': float(np.max(self.gap)),
        }


def _squared_norms(coeffs: np.ndarray) -> np.ndarray:
    """||f||^2 per sample for a (nt, c, n, n, n) coefficient array."""
    return VOLUME * np.sum(np.abs(coeffs) ** 2, axis=(1, 2, 3, 4))


def accumulate(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    if len(times) < 2:
        return np.zeros_like(values)
    return cumulative_trapezoid(values, times, initial=0.0)


def dissipation_rate(stage: Stage) -> np.ndarray:
    """||grad theta(t)||^2 per sample."""
    k2 = stage.grid.k2
    return VOLUME * np.sum(k2 * np.abs(stage.theta.coeffs[:, 0]) ** 2, axis=(1, 2, 3))


def buoyancy_work(stage: Stage) -> np.ndarray:
    """int theta v_3 per sample."""
    theta = stage.theta.coeffs[:, 0]
    v3 = stage.v.coeffs[:, 2]
    return VOLUME * np.real(np.sum(theta * np.conj(v3), axis=(1, 2, 3)))


def energy_functionals(stage: Stage, data: Optional[ProblemData] = None) -> EnergyFunctionals:
    """
    Evaluate E, M and the gap on the stage's time grid.

    Args:
        stage: Stage on a common time grid
        data: Problem data for e(t); without it the gap is reported against zero

    Returns:
        EnergyFunctionals
    """
    times = stage.times
    kinetic = _squared_norms(stage.v.coeffs)
    E = 0.5 * kinetic - accumulate(times, buoyancy_work(stage))
    if stage.dissipation is not None and len(stage.dissipation) == len(times):
        dissipated = np.asarray(stage.dissipation, dtype=float)
    else:
        dissipated = accumulate(times, dissipation_rate(stage))
    M = 0.5 * _squared_norms(stage.theta.coeffs) + dissipated
    energy = data.energy(times) if data is not None else np.zeros_like(times)
    return EnergyFunctionals(
        times=times, E=E, M=M, gap=np.asarray(energy) - kinetic, kinetic=kinetic
    )
