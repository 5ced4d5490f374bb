"""
Run report: named time series, check records, monitor tables and provenance.
"""

import json
import logging
import math
import platform
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from bousci import __version__
from bousci.core.gate_monitor import GateMonitor
from bousci.diagnostics.energy import EnergyFunctionals


logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def _jsonable(value: Any) -> Any:
    """numpy scalars/arrays to plain Python; non-finite floats to strings."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


@dataclass
class DiagnosticsReport:
    """
    Append-only report of one run.

    ``scalars`` maps a series name to {'t': [...], 'values': [...]};
    ``checks`` holds every GateMonitor record with its tolerance.
    """

    scalars: Dict[str, Dict[str, List[float]]] = field(default_factory=dict)
    checks: List[Dict[str, Any]] = field(default_factory=list)
    monitors: List[Dict[str, Any]] = field(default_factory=list)
    stages: List[Dict[str, Any]] = field(default_factory=list)
    studies: List[Dict[str, Any]] = field(default_factory=list)
    solve_logs: List[Dict[str, Any]] = field(default_factory=list)
    provenance: Dict[str, Any] = field(default_factory=dict)
    outcome: Dict[str, Any] = field(default_factory=lambda: {'status': 'pending'})

    def add_series(self, name: str, times: np.ndarray, values: np.ndarray) -> None:
        if name in self.scalars:
            raise KeyError(f"series '{name}' already recorded")
        self.scalars[name] = {
            't': [float(t) for t in times],
            'values': [float(v) for v in values],
        }

    def add_energy(self, q: int, energies: EnergyFunctionals) -> None:
        for name in ('E', 'M', 'gap'):
            self.add_series(f"stage_{q}.{name}", energies.times, getattr(energies, name))
        self.stages.append({'q': q, 'energy': energies.to_dict()})

    def add_checks(self, monitor: GateMonitor) -> None:
        """Append the monitor's records not yet in the report."""
        self.checks.extend(r.to_dict() for r in monitor.records[len(self.checks):])

    def add_monitor_table(self, table: pd.DataFrame) -> None:
        self.monitors.extend(table.to_dict(orient='records'))

    def set_outcome(self, status: str, **details: Any) -> None:
        self.outcome = {'status': status, **details}

    def to_dict(self) -> Dict[str, Any]:
        return _jsonable(
            {
                'schema_version': SCHEMA_VERSION,
                'provenance': self.provenance,
                'outcome': self.outcome,
                'stages': self.stages,
                'scalars': self.scalars,
                'checks': self.checks,
                'monitors': self.monitors,
                'studies': self.studies,
                'solve_logs': self.solve_logs,
            }
        )

    def series_frame(self) -> pd.DataFrame:
        """All series in one frame indexed by time, one column per series."""
        frames = [
            pd.Series(data['values'], index=pd.Index(data['t'], name='t'), name=name)
            for name, data in self.scalars.items()
        ]
        if not frames:
            return pd.DataFrame(index=pd.Index([], name='t'))
        merged = pd.concat(frames, axis=1)
        return merged.groupby(level=0).first().sort_index()


def provenance(config_hash: str, seed: Optional[int] = None, **extra: Any) -> Dict[str, Any]:
    return {
        'config_sha256': config_hash,
        'seed': seed,
        'bousci_version': __version__,
        'numpy_version': np.__version__,
        'pandas_version': pd.__version__,
        'python_version': platform.python_version(),
        'created': datetime.now(timezone.utc).isoformat(),
        **extra,
    }


def write_report(path: Union[str, Path], report: DiagnosticsReport) -> Path:
    """Pretty-printed JSON with sorted keys."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info(f"Report written: {path}")
    return path


def read_report(path: Union[str, Path]) -> Dict[str, Any]:
    with open(path) as f:
        return json.load(f)


def write_series_csv(path: Union[str, Path], report: DiagnosticsReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report.series_frame().to_csv(path)
    logger.info(f"Series written: {path}")
    return path


def write_monitor_csv(path: Union[str, Path], report: DiagnosticsReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(report.monitors).to_csv(path, index=False)
    return path
