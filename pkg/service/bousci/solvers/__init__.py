"""Windowed time integrators: forced Euler, transport-diffusion and back flows."""

from bousci.solvers.backflow import BackflowSolution, solve_backflow
from bousci.solvers.base_solver import SolveLog, SolverConfig, TimeIntegrator
from bousci.solvers.euler import EulerSolution, solve_forced_euler
from bousci.solvers.transport import (
    TransportSolution,
    solve_oscillatory_diffusion_test,
    solve_transport,
    solve_transport_diffusion,
)

__all__ = [
    'BackflowSolution',
    'EulerSolution',
    'SolveLog',
    'SolverConfig',
    'TimeIntegrator',
    'TransportSolution',
    'solve_backflow',
    'solve_forced_euler',
    'solve_oscillatory_diffusion_test',
    'solve_transport',
    'solve_transport_diffusion',
]
