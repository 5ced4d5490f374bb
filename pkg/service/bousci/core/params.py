"""
Problem data and the per-stage parameter schedule.

``ProblemData`` holds the user-facing inputs (exponents, frequency base, time
horizon, prescribed energy profile and initial temperature). ``build_schedule``
derives the frequency/amplitude ladder (lambda_q, delta_q) and the mollification
and gluing scales for every stage, and ``validate_constraints`` evaluates every
explicit inequality the iteration relies on, reporting a numeric margin for
each one instead of failing.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from bousci.core.errors import ConfigurationError


logger = logging.getLogger(__name__)

# Dense sampling used for sup/inf of the energy profile.
ENERGY_SAMPLES = 4097
TORUS_VOLUME = 8.0 * math.pi**3


class ProblemData(BaseModel):
    """
    Inputs of the construction.

    e(t) = e_constant + sum_m e_cos_amplitudes[m-1] * cos(2 pi m t / T)
    theta0(x3) = sum_m theta0_sine_amplitudes[m-1] * sin(m x3)
    """

    model_config = ConfigDict(frozen=True)

    beta: float
    b: float
    a: float
    alpha: float
    T: float
    e_constant: float = 1.0
    e_cos_amplitudes: Tuple[float, ...] = Field(default_factory=tuple)
    theta0_sine_amplitudes: Tuple[float, ...] = Field(default_factory=tuple)

    def energy(self, t: Any) -> np.ndarray:
        """Prescribed energy e(t), vectorized over t."""
        t = np.asarray(t, dtype=float)
        value = np.full(t.shape, self.e_constant, dtype=float)
        for m, amp in enumerate(self.e_cos_amplitudes, start=1):
            value = value + amp * np.cos(2.0 * math.pi * m * t / self.T)
        return value

    def energy_derivative(self, t: Any) -> np.ndarray:
        """Exact time derivative e'(t)."""
        t = np.asarray(t, dtype=float)
        value = np.zeros(t.shape, dtype=float)
        for m, amp in enumerate(self.e_cos_amplitudes, start=1):
            w = 2.0 * math.pi * m / self.T
            value = value - amp * w * np.sin(w * t)
        return value

    def theta0(self, x3: Any) -> np.ndarray:
        """Initial temperature profile theta0(x3)."""
        x3 = np.asarray(x3, dtype=float)
        value = np.zeros(x3.shape, dtype=float)
        for m, amp in enumerate(self.theta0_sine_amplitudes, start=1):
            value = value + amp * np.sin(m * x3)
        return value

    def theta0_l2_squared(self) -> float:
        """||theta0||^2 over the 2 pi torus (each sin(m x3) contributes 4 pi^3)."""
        return 4.0 * math.pi**3 * float(sum(s * s for s in self.theta0_sine_amplitudes))

    def theta0_grad_l2(self) -> float:
        """||grad theta0||_{L^2}."""
        total = sum((m * s) ** 2 for m, s in enumerate(self.theta0_sine_amplitudes, start=1))
        return math.sqrt(4.0 * math.pi**3 * total)

    def energy_samples(self) -> Tuple[np.ndarray, np.ndarray]:
        """Dense samples (t, e(t)) on [0, T]."""
        t = np.linspace(0.0, self.T, ENERGY_SAMPLES)
        return t, self.energy(t)


def b_upper_bound(beta: float) -> float:
    """Largest admissible super-exponential base for a given beta."""
    return (beta + math.sqrt(4.0 * beta - 3.0 * beta**2)) / (4.0 * beta)


def validate_problem(data: ProblemData) -> None:
    """
    Check the ranges of the problem data.

    Raises:
        ConfigurationError: naming the violated inequality
    """
    if not 0.0 < data.beta < 1.0 / 3.0:
        raise ConfigurationError(f"beta={data.beta} out of range", "0 < beta < 1/3")
    upper = b_upper_bound(data.beta)
    if not 1.0 < data.b < upper:
        raise ConfigurationError(
            f"b={data.b} out of range (upper bound {upper:.6f})",
            "1 < b < (beta + sqrt(4 beta - 3 beta^2)) / (4 beta)",
        )
    if data.a < 2.0:
        raise ConfigurationError(f"a={data.a} too small", "a >= 2")
    if data.alpha <= 0.0:
        raise ConfigurationError(f"alpha={data.alpha} must be positive", "alpha > 0")
    if data.T <= 0.0:
        raise ConfigurationError(f"T={data.T} must be positive", "T > 0")
    _, e = data.energy_samples()
    if float(e.min()) <= 0.0:
        raise ConfigurationError(
            f"energy profile not strictly positive (min {float(e.min()):.6g})", "min_t e(t) > 0"
        )


@dataclass(frozen=True)
class StageParams:
    """Derived parameters of stage q (plus the two following frequency levels)."""

    q: int
    lambda_q: int
    delta_q: float
    lambda_next: int
    delta_next: float
    lambda_after: int
    delta_after: float
    l: float
    tau_q: float
    M1: float
    m1: float
    C0: float
    beta: float
    alpha: float
    M: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


def frequency(a: float, b: float, q: int) -> int:
    """Integer frequency ceil(2 pi a^(b^q))."""
    return int(math.ceil(2.0 * math.pi * a ** (b**q)))


def stage_params(
    q: int,
    lambdas: Sequence[int],
    beta: float,
    alpha: float,
    M1: float,
    m1: float,
    M: Optional[float] = None,
) -> StageParams:
    """
    Build the parameters of stage q from the frequencies (lambda_q, lambda_{q+1}, lambda_{q+2}).

    Exposed separately from ``build_schedule`` so that small, grid-resolvable
    ladders can be assembled by hand.
    """
    lam, lam_next, lam_after = (int(x) for x in lambdas)
    if not 0 < lam < lam_next < lam_after:
        raise ConfigurationError(
            f"frequencies {lam}, {lam_next}, {lam_after} not increasing",
            "0 < lambda_q < lambda_{q+1} < lambda_{q+2}",
        )
    delta = lam ** (-2.0 * beta)
    delta_next = lam_next ** (-2.0 * beta)
    delta_after = lam_after ** (-2.0 * beta)
    l = math.sqrt(delta_next) / (math.sqrt(delta) * lam ** (1.0 + 1.5 * alpha))
    tau = l ** (2.0 * alpha) / (math.sqrt(delta) * lam)
    return StageParams(
        q=q,
        lambda_q=lam,
        delta_q=delta,
        lambda_next=lam_next,
        delta_next=delta_next,
        lambda_after=lam_after,
        delta_after=delta_after,
        l=l,
        tau_q=tau,
        M1=M1,
        m1=m1,
        C0=math.sqrt(M1 / (4.0 * math.pi**3)) + 1.0,
        beta=beta,
        alpha=alpha,
        M=M,
    )


@dataclass(frozen=True)
class ParamSchedule:
    """Problem data plus one ``StageParams`` per stage; indexable like a list."""

    data: ProblemData
    stages: Tuple[StageParams, ...]

    def __getitem__(self, q: int) -> StageParams:
        return self.stages[q]

    def __len__(self) -> int:
        return len(self.stages)

    def __iter__(self) -> Iterator[StageParams]:
        return iter(self.stages)

    @property
    def q_max(self) -> int:
        return len(self.stages) - 1

    def with_M(self, M: float) -> "ParamSchedule":
        return ParamSchedule(
            data=self.data,
            stages=tuple(dataclasses.replace(s, M=M) for s in self.stages),
        )


def energy_bounds(data: ProblemData) -> Tuple[float, float]:
    """(M1, m1) = (sup_t |e| + |e'|, inf_t e) by dense sampling."""
    t, e = data.energy_samples()
    de = data.energy_derivative(t)
    return float(np.max(np.abs(e) + np.abs(de))), float(np.min(e))


def build_schedule(
    data: ProblemData, q_max: int, frequencies: Optional[Sequence[int]] = None
) -> ParamSchedule:
    """
    Build StageParams for q = 0..q_max.

    Args:
        data: Problem data (validated here)
        q_max: Last stage index
        frequencies: Explicit ladder lambda_0, lambda_1, ... replacing
            ceil(2 pi a^(b^q)); needs at least q_max + 3 entries

    Returns:
        ParamSchedule with M left unset until the Mikado constants are known
    """
    validate_problem(data)
    if q_max < 0:
        raise ConfigurationError(f"q_max={q_max} must be non-negative", "q_max >= 0")
    M1, m1 = energy_bounds(data)
    if frequencies is None:
        lambdas = [frequency(data.a, data.b, q) for q in range(q_max + 3)]
    elif len(frequencies) < q_max + 3:
        raise ConfigurationError(
            f"{len(frequencies)} frequencies given, q_max={q_max} needs {q_max + 3}",
            "len(frequencies) >= q_max + 3",
        )
    else:
        lambdas = [int(f) for f in frequencies[: q_max + 3]]
    for q in range(q_max + 2):
        if lambdas[q + 1] <= lambdas[q]:
            raise ConfigurationError(
                f"frequency ladder stalls at q={q} ({lambdas[q]} -> {lambdas[q + 1]})",
                "lambda_{q+1} > lambda_q",
            )
    stages = tuple(
        stage_params(q, lambdas[q : q + 3], data.beta, data.alpha, M1, m1)
        for q in range(q_max + 1)
    )
    logger.info(
        f"Schedule built: q_max={q_max}, lambdas={lambdas[: q_max + 1]}, "
        f"M1={M1:.6g}, m1={m1:.6g}"
    )
    return ParamSchedule(data=data, stages=stages)


def lattice_sum(power: float, cutoff: int = 24, band: Optional[int] = None) -> float:
    """
    Sum of |k|^(-power) over nonzero k in Z^3.

    With ``band`` set, only |k_i| < band contributes (exact finite sum). Otherwise
    the cube |k_i| <= cutoff is summed and the remainder bounded by the integral
    of |x|^(-power) outside the ball of radius cutoff.
    """
    limit = band - 1 if band is not None else cutoff
    r = np.arange(-limit, limit + 1, dtype=float)
    k2 = r[:, None, None] ** 2 + r[None, :, None] ** 2 + r[None, None, :] ** 2
    k2[limit, limit, limit] = np.inf
    total = float(np.sum(k2 ** (-power / 2.0)))
    if band is None:
        if power <= 3.0:
            raise ValueError("lattice sum diverges for power <= 3")
        total += 4.0 * math.pi / ((power - 3.0) * cutoff ** (power - 3.0))
    return total


def geometric_constant(M1: float, c_hat_05: float, c0: float) -> float:
    """
    Constant M bounding the principal perturbation.

    M = max{sqrt(M1 / 4 pi^3), 12 * sum_{k != 0} (11/9) c_hat_05 / (c0^(1/2) |k|^4)}
    """
    tail = 12.0 * (11.0 / 9.0) * c_hat_05 / math.sqrt(c0) * lattice_sum(4.0)
    return max(math.sqrt(M1 / (4.0 * math.pi**3)), tail)


@dataclass
class ConstraintCheck:
    """One inequality lhs <= rhs (or strict), with its margin rhs - lhs."""

    name: str
    inequality: str
    lhs: float
    rhs: float
    strict: bool = False

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.lhs < self.rhs if self.strict else self.lhs <= self.rhs

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'inequality': self.inequality,
            'lhs': self.lhs,
            'rhs': self.rhs,
            'margin': self.margin,
            'passed': self.passed,
        }


@dataclass
class ConstraintReport:
    """Outcome of ``validate_constraints`` for one stage."""

    q: int
    checks: List[ConstraintCheck] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[ConstraintCheck]:
        return [c for c in self.checks if not c.passed]

    def passed_names(self) -> List[str]:
        return [c.name for c in self.checks if c.passed]

    def __getitem__(self, name: str) -> ConstraintCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'q': self.q,
            'all_passed': self.all_passed,
            'checks': [c.to_dict() for c in self.checks],
        }


def validate_constraints(
    schedule: ParamSchedule, q: int, sobolev_s: float = 0.6
) -> ConstraintReport:
    """
    Evaluate every explicit parameter inequality for stage q.

    Report-only: nothing is raised; each check carries lhs, rhs and margin.
    """
    data = schedule.data
    sp = schedule[q]
    beta, b, alpha = data.beta, data.b, data.alpha
    lam, delta, l, tau = sp.lambda_q, sp.delta_q, sp.l, sp.tau_q
    target = sp.delta_after * sp.lambda_next ** (-3.0 * alpha) / 3.0

    report = ConstraintReport(q=q)
    add = report.checks.append
    add(ConstraintCheck("mollifier_lower", "lambda_q^(-3/2) <= l", lam**-1.5, l))
    add(ConstraintCheck("mollifier_upper", "l <= lambda_q^(-1)", l, 1.0 / lam))

    if q == 0:
        d1 = sp.delta_next
        slack = d1 + d1 * lam ** (-alpha)
        _, e = data.energy_samples()
        add(
            ConstraintCheck(
                "start_gap_below_m1", "delta_1 - delta_1 lambda_0^(-alpha) <= m1",
                d1 - d1 * lam ** (-alpha), sp.m1,
            )
        )
        add(
            ConstraintCheck(
                "start_energy_positive", "2 e(t) - delta_1 - delta_1 lambda_0^(-alpha) > 0",
                0.0, float(np.min(2.0 * e - slack)), strict=True,
            )
        )
        add(
            ConstraintCheck(
                "start_shear_frequency",
                "(delta_0^(1/2) lambda_0)^(-1) <= delta_1 lambda_0^(-3 alpha)",
                1.0 / (math.sqrt(delta) * lam), d1 * lam ** (-3.0 * alpha),
            )
        )
        add(
            ConstraintCheck(
                "start_stress",
                "M1 / (sqrt(8 pi^3 m1) delta_0^(1/2) lambda_0) <= delta_1 lambda_0^(-3 alpha)",
                sp.M1 / (math.sqrt(TORUS_VOLUME * sp.m1) * math.sqrt(delta) * lam),
                d1 * lam ** (-3.0 * alpha),
            )
        )

    add(
        ConstraintCheck(
            "gluing_time_step",
            "tau_q l^(-1-alpha) <= delta_q^(1/2) lambda_q l^(-alpha)",
            tau * l ** (-1.0 - alpha), math.sqrt(delta) * lam * l ** (-alpha),
        )
    )
    add(
        ConstraintCheck(
            "backflow_smallness", "tau_q delta_q^(1/2) lambda_q <= 1/10",
            tau * math.sqrt(delta) * lam, 0.1,
        )
    )
    add(
        ConstraintCheck(
            "b_lower", "b > (1 - beta + 3 alpha / 2) / (1 - beta)",
            (1.0 - beta + 1.5 * alpha) / (1.0 - beta), b, strict=True,
        )
    )
    add(
        ConstraintCheck(
            "b_upper", "b < (1 - beta) / (2 beta)", b, (1.0 - beta) / (2.0 * beta), strict=True
        )
    )
    add(
        ConstraintCheck(
            "i2_exponent", "2 beta b^2 - b beta + beta / 2 - 1 < 0",
            2.0 * beta * b**2 - b * beta + beta / 2.0 - 1.0, 0.0, strict=True,
        )
    )
    add(
        ConstraintCheck(
            "i3_parameter", "l^(1-alpha) <= delta_{q+2} lambda_{q+1}^(-3 alpha) / 3",
            l ** (1.0 - alpha), target,
        )
    )
    s = sobolev_s
    i2_lhs = ((math.sqrt(delta) * lam) ** alpha * l ** (1.0 - alpha)) ** (1.0 - s) * (
        sp.delta_next ** (s / 2.0)
    )
    add(
        ConstraintCheck(
            "i2_parameter",
            "((delta_q^(1/2) lambda_q)^alpha l^(1-alpha))^(1-s) delta_{q+1}^(s/2) "
            "<= delta_{q+2} lambda_{q+1}^(-3 alpha) / 3",
            i2_lhs, target,
        )
    )

    for check in report.failures():
        logger.debug(f"q={q}: constraint {check.name} fails (margin {check.margin:.3g})")
    logger.info(
        f"Constraints q={q}: {len(report.checks) - len(report.failures())}/"
        f"{len(report.checks)} pass"
    )
    return report
