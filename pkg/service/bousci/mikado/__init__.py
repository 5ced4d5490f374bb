"""Mikado flows: six disjoint periodic tubes realizing a prescribed second moment."""

from bousci.mikado.family import (
    Coefficients,
    MikadoFamily,
    build_family,
    sym_components,
    verify_family,
    weights,
)
from bousci.mikado.geometry import DIRECTIONS, admissible_radius, line_distances

__all__ = [
    'Coefficients',
    'MikadoFamily',
    'build_family',
    'sym_components',
    'verify_family',
    'weights',
    'DIRECTIONS',
    'admissible_radius',
    'line_distances',
]
