"""The stage-by-stage construction: start, mollify, glue, perturb, new stress."""

from bousci.scheme.gluing import GluedStage, glue_stage
from bousci.scheme.iteration import SchemeSettings, StepResult, run_iteration
from bousci.scheme.mollification import MollifiedStage, mollify_stage
from bousci.scheme.perturbation import (
    Perturbation,
    PerturbationScaffold,
    build_perturbation,
    build_scaffold,
    next_velocity,
)
from bousci.scheme.reynolds import ReynoldsResult, direct_residual, next_reynolds
from bousci.scheme.stage import Stage, time_grid
from bousci.scheme.starting import init_stage
from bousci.scheme.stripes import GluePartition, StripeFamily, build_partition, build_stripes
from bousci.scheme.temperature import next_temperature

__all__ = [
    'GluePartition',
    'GluedStage',
    'MollifiedStage',
    'Perturbation',
    'PerturbationScaffold',
    'ReynoldsResult',
    'SchemeSettings',
    'Stage',
    'StepResult',
    'StripeFamily',
    'build_partition',
    'build_perturbation',
    'build_scaffold',
    'build_stripes',
    'direct_residual',
    'glue_stage',
    'init_stage',
    'mollify_stage',
    'next_reynolds',
    'next_temperature',
    'next_velocity',
    'run_iteration',
    'time_grid',
]
