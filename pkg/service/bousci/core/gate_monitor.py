"""
Gate Monitor - records identity checks and estimate monitors.

Every structural identity the pipeline verifies and every reported estimate
ratio passes through here, so a run ends with one complete table of what was
measured, against which tolerance, and whether it held.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional

from bousci.core.errors import MonitorViolation


logger = logging.getLogger(__name__)

MAX_VIOLATIONS = 1000


@dataclass
class CheckRecord:
    """One measured quantity and its tolerance."""

    name: str
    measured: float
    tolerance: Optional[float]
    passed: bool
    kind: str = 'identity'
    stage: Optional[int] = None
    step: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        if not math.isfinite(self.measured):
            data['measured'] = str(self.measured)
        return data


class GateMonitor:
    """
    Collects check records for a run.

    Identities carry a tolerance and a verdict. Monitors (ratios to the
    estimates the construction relies on) are recorded with their ratio and
    pass when the ratio is at most one; with ``strict`` set, failed identities
    and failed strict monitors raise ``MonitorViolation``.
    """

    def __init__(self, strict: bool = False, strict_monitors: Optional[List[str]] = None):
        self.strict = strict
        self.strict_monitors = set(strict_monitors or [])
        self.records: List[CheckRecord] = []
        self.violation_log: List[Dict[str, Any]] = []
        self._stage: Optional[int] = None
        self._step: Optional[str] = None
        logger.info(f"GateMonitor initialized (strict={self.strict})")

    def context(self, stage: Optional[int] = None, step: Optional[str] = None) -> None:
        """Set the stage/step attached to subsequent records."""
        self._stage = stage
        self._step = step

    def check(self, name: str, measured: float, tolerance: float) -> bool:
        """
        Record an identity |measured| <= tolerance.

        Raises:
            MonitorViolation: in strict mode when the identity fails
        """
        measured = float(measured)
        passed = math.isfinite(measured) and abs(measured) <= tolerance
        record = self._record(name, measured, tolerance, passed, 'identity')
        if not passed:
            logger.warning(f"Check {name} failed: {measured:.3e} > {tolerance:.1e}")
            if self.strict:
                raise MonitorViolation(name, measured, tolerance)
        return record.passed

    def monitor(self, name: str, lhs: float, rhs: float) -> float:
        """
        Record the ratio lhs / rhs of an estimate (never fatal unless listed as strict).

        Returns:
            The ratio (inf when rhs vanishes and lhs does not)
        """
        lhs, rhs = float(lhs), float(rhs)
        if rhs > 0.0:
            ratio = lhs / rhs
        else:
            ratio = 0.0 if lhs == 0.0 else math.inf
        passed = ratio <= 1.0
        self._record(name, ratio, 1.0, passed, 'monitor')
        if not passed:
            logger.debug(f"Monitor {name}: ratio {ratio:.3g}")
            if self.strict and name in self.strict_monitors:
                raise MonitorViolation(name, ratio, 1.0)
        return ratio

    def report(self, name: str, value: float) -> None:
        """Record a value without any pass threshold."""
        self._record(name, float(value), None, True, 'report')

    def _record(
        self, name: str, measured: float, tolerance: Optional[float], passed: bool, kind: str
    ) -> CheckRecord:
        record = CheckRecord(name, measured, tolerance, passed, kind, self._stage, self._step)
        self.records.append(record)
        if not passed:
            self._log_violation(record)
        return record

    def _log_violation(self, record: CheckRecord) -> None:
        self.violation_log.append(record.to_dict())

        # Keep log size manageable
        if len(self.violation_log) > MAX_VIOLATIONS:
            self.violation_log = self.violation_log[-MAX_VIOLATIONS:]

    def get_violation_stats(self) -> Dict[str, int]:
        """Count failed records per kind."""
        stats: Dict[str, int] = {}
        for violation in self.violation_log:
            stats[violation['kind']] = stats.get(violation['kind'], 0) + 1
        return stats

    def failed(self, kind: Optional[str] = None) -> List[CheckRecord]:
        return [r for r in self.records if not r.passed and (kind is None or r.kind == kind)]

    def latest(self, name: str) -> Optional[CheckRecord]:
        for record in reversed(self.records):
            if record.name == name:
                return record
        return None

    def to_list(self, stage: Optional[int] = None) -> List[Dict[str, Any]]:
        return [r.to_dict() for r in self.records if stage is None or r.stage == stage]

    def clear(self) -> None:
        self.records.clear()
        self.violation_log.clear()
