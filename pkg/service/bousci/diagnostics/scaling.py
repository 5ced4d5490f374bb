"""
Scaling studies: run one micro-experiment across a sweep and fit the exponent.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np

from bousci.core.errors import GridMismatchError
from bousci.fields.calculus import mollify, quadratic_commutator
from bousci.fields.field import Field
from bousci.fields.grid import Grid
from bousci.fields.norms import holder_seminorm, l2_norm, sup_norm
from bousci.mikado.family import MikadoFamily
from bousci.solvers.base_solver import SolverConfig
from bousci.solvers.transport import solve_oscillatory_diffusion_test


logger = logging.getLogger(__name__)

STUDY_GRID = 128
HOLDER_ORDER = 0.3


@dataclass
class ScalingResult:
    """Sweep values, measured quantities and the least-squares exponent."""

    kind: str
    sweep: np.ndarray
    values: np.ndarray
    exponent: float
    threshold: float
    tolerance: Optional[float] = None

    @property
    def passed(self) -> bool:
        if self.tolerance is not None:
            return abs(self.exponent - self.threshold) <= self.tolerance
        return self.exponent >= self.threshold

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'sweep': self.sweep.tolist(),
            'values': self.values.tolist(),
            'exponent': self.exponent,
            'threshold': self.threshold,
            'tolerance': self.tolerance,
            'passed': self.passed,
        }


def fit_exponent(sweep: Sequence[float], values: Sequence[float]) -> float:
    """Slope of log(values) against log(sweep)."""
    x = np.log(np.asarray(sweep, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def _test_pair(grid: Grid) -> tuple:
    x1, x2, x3 = grid.x
    f = Field.scalar(grid, np.sin(x1) + 0.5 * np.cos(2.0 * x2 + x3))
    g = Field.scalar(grid, np.cos(x2) * np.sin(x3) + 0.25 * np.sin(3.0 * x1))
    return f, g


def commutator_values(lengths: Sequence[float], grid: Grid) -> np.ndarray:
    f, g = _test_pair(grid)
    return np.array([sup_norm(quadratic_commutator(f, g, l)) for l in lengths])


def mollifier_values(lengths: Sequence[float], grid: Grid) -> np.ndarray:
    x1 = grid.x[0]
    f = Field.scalar(grid, np.abs(np.sin(x1)) * np.sin(x1))
    return np.array([sup_norm(mollify(f, l) - f) for l in lengths])


def oscillatory_values(
    frequencies: Sequence[int], grid: Grid, config: Optional[SolverConfig] = None
) -> np.ndarray:
    """sup_t ||theta(t)||_{L2} of the zero-data response to (1 + cos(x1)/2) cos(lam x3)."""
    config = config or SolverConfig()
    g = Field.scalar(grid, 1.0 + 0.5 * np.cos(grid.x[0]))
    values = []
    for lam in frequencies:
        solution = solve_oscillatory_diffusion_test(
            None, g, int(lam), (0, 0, 1), (0.0, 0.2), 0.02, config
        )
        values.append(max(l2_norm(f) for f in solution.theta))
    return np.array(values)


def holder_values(frequencies: Sequence[int], grid: Grid) -> np.ndarray:
    """[sin(lam x1)]_{HOLDER_ORDER} for each lam; lam must lie inside the dealiased band."""
    band = grid.dealias_fraction * grid.n / 2
    for lam in frequencies:
        if lam <= 0 or lam >= band:
            raise GridMismatchError(f"frequency {lam} outside the grid band (0, {band:g})")
    x1 = grid.x[0]
    return np.array(
        [
            holder_seminorm(Field.scalar(grid, np.sin(lam * x1)), HOLDER_ORDER)
            for lam in frequencies
        ]
    )


DEFAULT_SWEEPS: Dict[str, Sequence[float]] = {
    'commutator': (0.4, 0.2, 0.1),
    'mollifier': (0.4, 0.2, 0.1),
    'oscillatory_diffusion': (8, 16, 32),
    'mikado_decay': (64, 128, 256, 512),
    'holder': (4, 8, 16, 32),
}


def scaling_study(
    kind: str,
    sweep: Optional[Sequence[float]] = None,
    grid: Optional[Grid] = None,
    family: Optional[MikadoFamily] = None,
    config: Optional[SolverConfig] = None,
) -> ScalingResult:
    """
    Run a scaling study.

    Args:
        kind: commutator | mollifier | oscillatory_diffusion | mikado_decay | holder
        sweep: Swept parameter (defaults per kind)
        grid: Grid for the field experiments (128^3 by default)
        family: Mikado family, required for ``mikado_decay``
        config: Solver settings for ``oscillatory_diffusion``

    Returns:
        ScalingResult

    Raises:
        ValueError: for an unknown kind, a sweep of fewer than three points or
            ``mikado_decay`` without a family
    """
    if kind not in DEFAULT_SWEEPS:
        raise ValueError(f"unknown scaling study '{kind}'")
    points = np.asarray(sweep if sweep is not None else DEFAULT_SWEEPS[kind], dtype=float)
    if points.size < 3:
        raise ValueError(f"scaling study '{kind}' needs at least three sweep points")
    grid = grid or Grid(STUDY_GRID)

    runners: Dict[str, Callable[[], np.ndarray]] = {
        'commutator': lambda: commutator_values(points, grid),
        'mollifier': lambda: mollifier_values(points, grid),
        'oscillatory_diffusion': lambda: oscillatory_values(points.astype(int), grid, config),
        'holder': lambda: holder_values(points.astype(int), grid),
    }
    tolerance = None
    if kind == 'mikado_decay':
        if family is None:
            raise ValueError("mikado_decay needs a Mikado family")
        exponent, values = family.decay_fit(points.astype(int).tolist())
        threshold = 4.0
    else:
        values = runners[kind]()
        slope = fit_exponent(points, values)
        if kind == 'commutator':
            exponent, threshold = slope, 1.9
        elif kind == 'mollifier':
            exponent, threshold = slope, 0.95
        elif kind == 'oscillatory_diffusion':
            exponent, threshold = -slope, 0.9
        else:
            exponent, threshold, tolerance = slope, HOLDER_ORDER, 0.05

    result = ScalingResult(
        kind=kind,
        sweep=points,
        values=np.asarray(values, dtype=float),
        exponent=float(exponent),
        threshold=threshold,
        tolerance=tolerance,
    )
    logger.info(
        f"Scaling study {kind}: exponent {result.exponent:.3f} "
        f"(threshold {threshold}, {'pass' if result.passed else 'FAIL'})"
    )
    return result
