"""
Exception hierarchy for bousci.

Every failure the lab can declare is a subclass of ``BousciError``. Solver and
scheme aborts carry a diagnostics/trace dictionary so that partial runs can be
persisted with a complete failure record.
"""

from typing import Any, Dict, Optional, Sequence


class BousciError(Exception):
    """Base class for all bousci errors."""


class ConfigurationError(BousciError):
    """A problem parameter violates one of the admissibility inequalities."""

    def __init__(self, message: str, inequality: Optional[str] = None):
        self.inequality = inequality
        if inequality:
            message = f"{message} (violated: {inequality})"
        super().__init__(message)


class GridMismatchError(BousciError):
    """Operands live on different grids or have the wrong shape."""


class UnresolvedMollifierError(BousciError):
    """Mollification length at or below the grid step."""

    def __init__(self, length: float, grid_step: float):
        self.length = length
        self.grid_step = grid_step
        super().__init__(
            f"mollification length l={length:.6g} is not resolved by grid step {grid_step:.6g}"
        )


class NonZeroMeanError(BousciError):
    """Zero-mean precondition of an inverse operator failed."""

    def __init__(self, mean: Sequence[float], tolerance: float, context: str = ""):
        self.mean = [float(m) for m in mean]
        self.tolerance = tolerance
        where = f" in {context}" if context else ""
        super().__init__(
            f"argument has non-zero mean {self.mean} (tolerance {tolerance:g}){where}"
        )


class InadmissibleMatrixError(BousciError):
    """A target matrix leaves the region where all Mikado weights are positive."""

    def __init__(self, min_coefficient: float):
        self.min_coefficient = float(min_coefficient)
        super().__init__(f"inadmissible matrix: min_j c_j = {self.min_coefficient:.6g} <= 0")


class PlacementError(BousciError):
    """No disjoint placement of the periodic tubes was found."""

    def __init__(self, achieved: float, required: float):
        self.achieved = float(achieved)
        self.required = float(required)
        super().__init__(
            f"tube placement failed: minimal line distance {self.achieved:.6g} "
            f"<= required {self.required:.6g}"
        )


class TableRangeError(BousciError):
    """Requested Fourier mode is outside the stored Mikado table."""


class SnapshotFormatError(BousciError):
    """Corrupt or incompatible snapshot container."""


class SolverAbort(BousciError):
    """A time integrator gave up; ``diagnostics`` describes the state at abort."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class CFLViolationError(SolverAbort):
    """Required time step fell below what the step budget allows."""


class BlowUpError(SolverAbort):
    """Velocity grew beyond the blow-up factor within the window."""


class SchemeAbort(BousciError):
    """A declared gate of the iteration failed; ``trace`` holds the evidence."""

    gate = "scheme"

    def __init__(self, message: str, trace: Optional[Dict[str, Any]] = None):
        self.trace = trace or {}
        super().__init__(message)


class EnergyGapError(SchemeAbort):
    """Pumping energy rho_q became non-positive."""

    gate = "energy_gap"


class AdmissibilityError(SchemeAbort):
    """Normalized stress left the Mikado admissibility gate."""

    gate = "mikado_admissibility"


class MonitorViolation(BousciError):
    """A check failed while strict mode was enabled."""

    def __init__(self, name: str, measured: float, tolerance: float):
        self.name = name
        self.measured = measured
        self.tolerance = tolerance
        super().__init__(
            f"check '{name}' failed: measured {measured:.6g}, tolerance {tolerance:.6g}"
        )
