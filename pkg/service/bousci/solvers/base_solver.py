"""
Base Time Integrator Interface

All windowed solvers share the explicit RK4 stepping loop, the CFL time step
rule, the blow-up detector and the per-solve log defined here.
"""

import json
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from bousci.core.errors import BlowUpError, CFLViolationError, ConfigurationError
from bousci.fields.grid import Grid


logger = logging.getLogger(__name__)

# Classical RK4 weights (a) and stage offsets (b).
RK4_A = (1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0)
RK4_B = (0.5, 0.5, 1.0)


class SolverConfig(BaseModel):
    """Settings shared by every time integrator."""

    model_config = ConfigDict(frozen=True)

    dt_cfl_factor: float = Field(0.5, gt=0.0, le=1.0)
    integrator: Literal['rk4'] = 'rk4'
    diffusion_treatment: Literal['integrating_factor'] = 'integrating_factor'
    dealias: bool = True
    max_dt: Optional[float] = Field(None, gt=0.0)
    blowup_factor: float = Field(10.0, gt=1.0)
    max_substeps: int = Field(200000, gt=0)

    @classmethod
    def from_section(cls, section: Dict[str, Any]) -> "SolverConfig":
        """Build from the ``solver`` configuration section."""
        try:
            return cls(**section)
        except ValidationError as e:
            raise ConfigurationError(
                f"Invalid solver section: {e}", "0 < dt_cfl_factor <= 1"
            ) from e


@dataclass
class SolveLog:
    """Step statistics and conservation residuals of one windowed solve."""

    name: str
    t_start: float
    t_stop: float
    steps: int = 0
    dt_min: float = math.inf
    dt_max: float = 0.0
    max_cfl: float = 0.0
    residuals: Dict[str, float] = field(default_factory=dict)

    def record_step(self, dt: float, speed: float, dx: float) -> None:
        self.steps += 1
        self.dt_min = min(self.dt_min, abs(dt))
        self.dt_max = max(self.dt_max, abs(dt))
        self.max_cfl = max(self.max_cfl, abs(dt) * speed / dx)

    def record_residual(self, name: str, value: float) -> None:
        """Keep the largest value seen for ``name``."""
        self.residuals[name] = max(self.residuals.get(name, 0.0), float(value))

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        if not math.isfinite(self.dt_min):
            data['dt_min'] = None
        return data

    def write_json(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))


class TimeIntegrator(ABC):
    """
    Explicit integrator for a coefficient-array state on one grid.

    Subclasses supply the right-hand side and the transport speed; ``integrate``
    walks the uniform sample grid forward or backward, taking CFL-limited
    substeps that land exactly on every sample time.
    """

    def __init__(self, grid: Grid, config: SolverConfig, name: str):
        self.grid = grid
        self.config = config
        self.name = name
        self.log = SolveLog(name=name, t_start=0.0, t_stop=0.0)
        self._reference_speed = 1.0

    @abstractmethod
    def rhs(self, t: float, state: np.ndarray) -> np.ndarray:
        """Time derivative of the state at time t."""

    @abstractmethod
    def speed(self, t: float, state: np.ndarray) -> float:
        """Sup of the advecting velocity, used for the CFL rule."""

    def step(self, t: float, state: np.ndarray, h: float) -> np.ndarray:
        """One classical RK4 step of signed size h."""
        state0 = state
        state1 = state.copy()
        current = state
        for rk in range(4):
            dU = self.rhs(t + (RK4_B[rk - 1] * h if rk else 0.0), current)
            if rk < 3:
                current = state0 + RK4_B[rk] * h * dU
            state1 = state1 + RK4_A[rk] * h * dU
        return state1

    def time_step(self, t: float, state: np.ndarray) -> float:
        dt = self.config.dt_cfl_factor * self.grid.dx / max(1.0, self.speed(t, state))
        if self.config.max_dt is not None:
            dt = min(dt, self.config.max_dt)
        return dt

    def check_state(self, t: float, state: np.ndarray) -> None:
        """Abort on NaN or on growth beyond ``blowup_factor``."""
        if not np.all(np.isfinite(state)):
            raise BlowUpError(
                f"{self.name}: non-finite state at t={t:.6g}", self._diagnostics(t)
            )
        speed = self.speed(t, state)
        if speed > self.config.blowup_factor * self._reference_speed:
            raise BlowUpError(
                f"{self.name}: sup grew to {speed:.6g} "
                f"(> {self.config.blowup_factor} x {self._reference_speed:.6g})",
                self._diagnostics(t, speed=speed),
            )

    def _diagnostics(self, t: float, **extra: Any) -> Dict[str, Any]:
        info = {'t': t, 'steps': self.log.steps, 'dt_min': self.log.dt_min}
        info.update(extra)
        return info

    def integrate(
        self, state0: np.ndarray, t_start: float, dt_sample: float, count: int,
        direction: int = 1,
    ) -> List[np.ndarray]:
        """
        States at t_start + direction * s * dt_sample for s = 0..count-1.

        Raises:
            CFLViolationError: if the substep budget is exhausted
            BlowUpError: on non-finite or runaway states
        """
        self._reference_speed = max(1.0, self.speed(t_start, state0))
        states = [state0]
        state = state0
        t = t_start
        for s in range(1, count):
            target = t_start + direction * s * dt_sample
            span = abs(target - t)
            substeps = max(1, int(math.ceil(span / self.time_step(t, state) - 1e-12)))
            if self.log.steps + substeps > self.config.max_substeps:
                raise CFLViolationError(
                    f"{self.name}: step budget {self.config.max_substeps} exhausted at t={t:.6g}",
                    self._diagnostics(t, required=substeps),
                )
            h = direction * span / substeps
            for _ in range(substeps):
                speed = self.speed(t, state)
                state = self.step(t, state, h)
                self.log.record_step(h, speed, self.grid.dx)
                t += h
            t = target
            self.check_state(t, state)
            states.append(state)
            logger.debug(f"{self.name}: reached t={t:.6g} after {self.log.steps} steps")
        return states

    def begin_log(self, t_start: float, t_stop: float) -> None:
        self.log = SolveLog(name=self.name, t_start=t_start, t_stop=t_stop)
