"""Energy functionals, estimate monitors, scaling studies, snapshots and reports."""

from bousci.diagnostics.energy import EnergyFunctionals, energy_functionals
from bousci.diagnostics.monitors import monitor_proposition
from bousci.diagnostics.report import DiagnosticsReport, read_report, write_report
from bousci.diagnostics.scaling import ScalingResult, scaling_study
from bousci.diagnostics.snapshot import read_family, read_snapshot, write_family, write_snapshot

__all__ = [
    'DiagnosticsReport',
    'EnergyFunctionals',
    'ScalingResult',
    'energy_functionals',
    'monitor_proposition',
    'read_family',
    'read_report',
    'read_snapshot',
    'scaling_study',
    'write_family',
    'write_report',
    'write_snapshot',
]
