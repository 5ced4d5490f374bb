"""
Temperature of the next stage: transport-diffusion by v_{q+1} from theta^0.
"""

import logging
import math
from typing import Optional

from bousci.core.gate_monitor import GateMonitor
from bousci.core.params import ProblemData, StageParams
from bousci.fields.field import Field, TimeSeriesField
from bousci.fields.grid import Grid
from bousci.fields.norms import l2_norm, sobolev_norm, sup_norm
from bousci.solvers.base_solver import SolverConfig
from bousci.solvers.transport import TransportSolution, solve_transport_diffusion


logger = logging.getLogger(__name__)

ENERGY_DRIFT_TOLERANCE = 1e-5


def initial_temperature(grid: Grid, data: ProblemData) -> Field:
    return Field.scalar(grid, data.theta0(grid.x[2]))


def next_temperature(
    v_next: TimeSeriesField,
    data: ProblemData,
    config: SolverConfig,
    sp: Optional[StageParams] = None,
    theta_prev: Optional[TimeSeriesField] = None,
    monitor: Optional[GateMonitor] = None,
) -> TransportSolution:
    """
    Solve d_t theta + v_{q+1} . grad theta = Delta theta from theta^0 over the
    stored span of v_{q+1}.

    With ``theta_prev`` and ``sp`` given, the differences to theta_q are
    reported against their expected sizes.
    """
    grid = v_next.grid
    theta0 = initial_temperature(grid, data)
    solution = solve_transport_diffusion(
        v_next, theta0, (v_next.t0, v_next.t1), v_next.dt, config
    )
    if monitor is not None:
        q = sp.q + 1 if sp is not None else None
        monitor.context(stage=q, step='temperature')
        drift = solution.log.residuals.get('energy_drift', 0.0)
        if data.theta0_l2_squared() > 0.0:
            monitor.check('temperature_energy_drift', drift, ENERGY_DRIFT_TOLERANCE)
        monitor.report(
            'maximum_principle_excess', solution.log.residuals.get('max_principle_excess', 0.0)
        )
        grad_sup = max(sobolev_norm(f, 1.0) for f in solution.theta)
        speed = max(sup_norm(f) for f in v_next)
        monitor.monitor(
            'temperature_gradient',
            grad_sup,
            data.theta0_grad_l2() + speed**2 * math.sqrt(data.theta0_l2_squared()),
        )
        if theta_prev is not None and sp is not None and len(theta_prev) == len(solution.theta):
            diff = solution.theta - theta_prev
            l2 = max(l2_norm(f) for f in diff)
            h1 = max(sobolev_norm(f, 1.0) for f in diff)
            target = (math.sqrt(sp.delta_q) * sp.lambda_q) ** sp.alpha * sp.l ** (1.0 - sp.alpha)
            monitor.monitor('temperature_difference', l2, target)
            monitor.report('temperature_gradient_difference', h1)
    logger.info(
        f"Temperature on [{v_next.t0:.4g}, {v_next.t1:.4g}]: "
        f"M drift {solution.log.residuals.get('energy_drift', 0.0):.3g}"
    )
    return solution

