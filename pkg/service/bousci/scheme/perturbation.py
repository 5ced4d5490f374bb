"""
Perturbation of the glued velocity.

The scaffold fixes the energy pumping rho_q(t), its stripe-localized pieces
rho_{q,i} and the conjugated stresses Rtilde_{q,i} = grad Phi_i R_{q,i} grad Phi_i^T / rho_{q,i}.
The perturbation is the curl of

    A = sum_i rho_{q,i}^{1/2} grad Phi_i^T sum_j Gamma_j(Rtilde_{q,i}) U_j(lambda Phi_i) / lambda,

so it is divergence free in coefficients; its principal part is
w_0 = sum_i rho_{q,i}^{1/2} (grad Phi_i)^{-1} W(Rtilde_{q,i}, lambda Phi_i).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from bousci.core.errors import AdmissibilityError, EnergyGapError, GridMismatchError
from bousci.core.gate_monitor import GateMonitor
from bousci.core.params import ProblemData, StageParams
from bousci.fields.derivatives import curl
from bousci.fields.field import DIAGONAL, Field, Rank, TimeSeriesField, transform_inverse
from bousci.fields.norms import VOLUME, sup_norm
from bousci.mikado.family import MikadoFamily, sym_components, weights
from bousci.mikado.geometry import DIRECTIONS
from bousci.scheme.gluing import GluedStage
from bousci.scheme.stage import time_derivative
from bousci.scheme.stripes import StripeFamily
from bousci.solvers.backflow import BackflowSolution, solve_backflow
from bousci.solvers.base_solver import SolverConfig


logger = logging.getLogger(__name__)

DIVERGENCE_TOLERANCE = 1e-10
BACKFLOW_BOUND = 0.1
POTENTIALS = ('continuum', 'table')


@dataclass
class StripeScaffold:
    """Per-stripe fields on the samples first .. first + len - 1."""

    i: int
    first: int
    rho_sqrt: np.ndarray
    Rtilde: np.ndarray
    backflow: BackflowSolution
    margin: float
    deviation: float

    def __len__(self) -> int:
        return self.rho_sqrt.shape[0]

    def covers(self, s: int) -> bool:
        return self.first <= s < self.first + len(self)

    def index(self, s: int) -> int:
        if not self.covers(s):
            raise GridMismatchError(f"sample {s} outside stripe {self.i}")
        return s - self.first


@dataclass
class PerturbationScaffold:
    """rho_q, stripe masses and one ``StripeScaffold`` per stripe."""

    q: int
    rho: np.ndarray
    mass: np.ndarray
    stripes: StripeFamily
    pieces: List[StripeScaffold]
    times: np.ndarray
    gate: float
    margin: float = math.inf
    max_deviation: float = 0.0
    backflow_deviation: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def eta_squared_sum(self, s: int, axis: np.ndarray) -> np.ndarray:
        """sum_i eta_i(t_s, x_3)^2 on the x_3 axis."""
        t = float(self.times[s])
        return sum(self.stripes.eta(i, t, axis) ** 2 for i in range(self.stripes.count))

    def sum_rho(self, s: int, axis: np.ndarray) -> np.ndarray:
        """sum_i rho_{q,i} as a function of x_3."""
        return self.rho[s] * self.eta_squared_sum(s, axis) / self.mass[s]

    def sum_stress(self, s: int, R_bar: Field) -> Field:
        """sum_i R_{q,i} = (sum_i rho_{q,i}) Id - (sum_i eta_i^2) R_bar."""
        grid = R_bar.grid
        axis = grid.axis
        eta2 = self.eta_squared_sum(s, axis)[None, None, None, :]
        rho = self.sum_rho(s, axis)[None, None, None, :]
        comps = -eta2 * R_bar.samples()
        for d in DIAGONAL:
            comps[d] = comps[d] + rho[0]
        return Field.from_samples(grid, comps, Rank.SYM_TENSOR)

    def covering(self, s: int) -> List[StripeScaffold]:
        return [piece for piece in self.pieces if piece.covers(s)]


def pumping_energy(glued: GluedStage, data: ProblemData, sp: StageParams) -> np.ndarray:
    """rho_q(t) = (e(t) - delta_{q+2} / 2 - int |v_bar|^2) / 3 at every sample."""
    energy = VOLUME * np.sum(np.abs(glued.v.coeffs) ** 2, axis=(1, 2, 3, 4))
    return (data.energy(glued.v.times) - sp.delta_after / 2.0 - energy) / 3.0


def _window(stripes: StripeFamily, i: int, series: TimeSeriesField) -> Tuple[int, int]:
    lo, hi = stripes.support(i)
    dt = series.dt
    first = max(0, int(math.floor(lo / dt + 1e-9)))
    last = min(len(series) - 1, int(math.ceil(hi / dt - 1e-9)))
    return first, last


def _conjugate(J: np.ndarray, R_bar: np.ndarray, ratio: float) -> np.ndarray:
    """J J^T - ratio J R_bar J^T for (3, 3, n, n, n) arrays."""
    JJ = np.einsum('aixyz,bixyz->abxyz', J, J)
    JRJ = np.einsum('aixyz,ijxyz,bjxyz->abxyz', J, R_bar, J)
    return JJ - ratio * JRJ


def build_scaffold(
    glued: GluedStage,
    stripes: StripeFamily,
    data: ProblemData,
    sp: StageParams,
    family: MikadoFamily,
    config: SolverConfig,
    monitor: Optional[GateMonitor] = None,
) -> PerturbationScaffold:
    """
    Raises:
        EnergyGapError: if rho_q(t) <= 0 at some sample
        AdmissibilityError: if Rtilde_{q,i} leaves the Mikado gate on supp eta_i
    """
    times = glued.v.times
    rho = pumping_energy(glued, data, sp)
    if float(np.min(rho)) <= 0.0:
        worst = int(np.argmin(rho))
        raise EnergyGapError(
            f"rho_q vanishes at t={times[worst]:.6g} (rho={rho[worst]:.3e})",
            trace={
                'q': glued.q,
                't': times.tolist(),
                'rho': rho.tolist(),
                'energy': data.energy(times).tolist(),
                'delta_after': sp.delta_after,
            },
        )
    grid = glued.v.grid
    mass = stripes.mass(times, grid.axis)

    pieces: List[StripeScaffold] = []
    eye = np.eye(3)[:, :, None, None, None]
    backflow_dev = 0.0
    for i in range(stripes.count):
        first, last = _window(stripes, i, glued.v)
        t_init = i * stripes.partition.tau
        flow = solve_backflow(
            glued.v, t_init, (float(times[first]), float(times[last])), config
        )
        count = last - first + 1
        rho_sqrt = np.zeros((count,) + grid.shape)
        Rtilde = np.zeros((count, 6) + grid.shape)
        margin, deviation = math.inf, 0.0
        for idx in range(count):
            s = first + idx
            eta = stripes.eta(i, float(times[s]), grid.axis)
            if not np.any(eta > 0.0):
                Rtilde[idx] = sym_components(np.broadcast_to(eye, (3, 3) + grid.shape))
                continue
            rho_sqrt[idx] = np.broadcast_to(
                eta[None, None, :] * math.sqrt(rho[s] / mass[s]), grid.shape
            )
            J = flow.jacobian(idx)
            backflow_dev = max(backflow_dev, flow.deviation(idx))
            R_tilde = _conjugate(J, glued.R.snapshot(s).full(), mass[s] / rho[s])
            Rtilde[idx] = sym_components(R_tilde)
            support = np.broadcast_to(eta[None, None, :] > 0.0, grid.shape)
            dev = np.sqrt(np.sum((R_tilde - eye) ** 2, axis=(0, 1)))[support]
            c = weights(Rtilde[idx])[:, support]
            deviation = max(deviation, float(np.max(dev)))
            margin = min(margin, float(np.min(c)))
        if deviation >= family.gate or margin <= 0.0:
            raise AdmissibilityError(
                f"Rtilde_{glued.q},{i} leaves the admissibility gate "
                f"(deviation {deviation:.3g}, gate {family.gate:.3g}, margin {margin:.3g})",
                trace={
                    'q': glued.q,
                    'stripe': i,
                    'deviation': deviation,
                    'gate': family.gate,
                    'margin': margin,
                    'window': [float(times[first]), float(times[last])],
                },
            )
        pieces.append(StripeScaffold(i, first, rho_sqrt, Rtilde, flow, margin, deviation))

    scaffold = PerturbationScaffold(
        q=glued.q,
        rho=rho,
        mass=mass,
        stripes=stripes,
        pieces=pieces,
        times=times,
        gate=family.gate,
        margin=min((p.margin for p in pieces), default=math.inf),
        max_deviation=max((p.deviation for p in pieces), default=0.0),
        backflow_deviation=backflow_dev,
    )
    if monitor is not None:
        monitor.context(stage=glued.q, step='scaffold')
        monitor.monitor('rho_upper', float(np.max(rho)), sp.delta_next)
        monitor.monitor(
            'rho_lower', sp.delta_next / (8.0 * sp.lambda_q**sp.alpha), float(np.min(rho))
        )
        rho_sup = max((float(np.max(p.rho_sqrt)) ** 2 for p in pieces), default=0.0)
        monitor.monitor('rho_stripe_sup', rho_sup, sp.delta_next / stripes.c0)
        monitor.monitor('backflow_jacobian', backflow_dev, BACKFLOW_BOUND)
        monitor.monitor('rtilde_deviation', scaffold.max_deviation, 0.5)
        monitor.report('admissibility_margin', scaffold.margin)
    logger.info(
        f"Scaffold q={glued.q}: rho in [{float(np.min(rho)):.3g}, {float(np.max(rho)):.3g}], "
        f"margin {scaffold.margin:.3g}, deviation {scaffold.max_deviation:.3g}"
    )
    return scaffold


@dataclass
class Perturbation:
    """w_{q+1} = w_0 + w_c with its time derivative and the corrector cross-check."""

    w: TimeSeriesField
    w0: TimeSeriesField
    wc: TimeSeriesField
    dwdt: TimeSeriesField
    corrector_gap: float
    lam: int


def _amplitudes(piece: StripeScaffold, idx: int) -> np.ndarray:
    """a_j = rho^{1/2} Gamma_j(Rtilde), zero off the stripe."""
    rho_sqrt = piece.rho_sqrt[idx]
    c = weights(piece.Rtilde[idx])
    gamma = np.sqrt(np.where(rho_sqrt > 0.0, np.maximum(c, 0.0), 0.0))
    return rho_sqrt[None] * gamma


def _sample_terms(
    scaffold: PerturbationScaffold,
    family: MikadoFamily,
    lam: int,
    s: int,
    grid: Any,
    potential: str = 'continuum',
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Potential A, principal part w_0 and explicit corrector at one sample (real samples).

    ``potential`` selects the closed-form tube potentials or their Fourier sums over
    the table modes |k_i| <= k_max.
    """
    A = np.zeros((3,) + grid.shape)
    w0 = np.zeros((3,) + grid.shape)
    wc = np.zeros((3,) + grid.shape)
    for piece in scaffold.covering(s):
        idx = piece.index(s)
        if not np.any(piece.rho_sqrt[idx] > 0.0):
            continue
        flow = piece.backflow
        xi = lam * flow.phase(idx)
        J = flow.jacobian(idx)
        Jm = np.moveaxis(J, (0, 1), (-2, -1))
        J_inv = np.moveaxis(np.linalg.inv(Jm), (-2, -1), (0, 1))
        det = np.linalg.det(Jm)
        amps = _amplitudes(piece, idx)
        for j in range(len(DIRECTIONS)):
            a = amps[j]
            if potential == 'table':
                U = family.table_potential(j, xi)
                profile = family.table_profile(j, xi)
            else:
                U = family.continuum_potential(j, xi)
                profile = family.continuum_profile(j, xi)
            JtU = np.einsum('abxyz,axyz->bxyz', J, U)
            A += a * JtU / lam
            direction = DIRECTIONS[j].astype(float)
            principal = a * profile
            flux = np.einsum('abxyz,b->axyz', J_inv, direction) * principal
            w0 += flux
            grad_a = transform_inverse(1j * grid.k * Field.scalar(grid, a).coeffs[0])
            wc += np.cross(grad_a, JtU, axis=0) / lam + (det - 1.0) * flux
    return A, w0, wc


def build_perturbation(
    scaffold: PerturbationScaffold,
    family: MikadoFamily,
    lam: int,
    sp: StageParams,
    monitor: Optional[GateMonitor] = None,
    max_workers: int = 1,
    potential: str = 'continuum',
) -> Perturbation:
    """
    Assemble w_{q+1} = curl A at every sample.

    With ``potential='table'`` A is summed over the Fourier table modes of the
    tube profiles instead of their closed form.

    The corrector w_c = w - w_0 is compared with its explicit form
    sum (1/lambda) grad a_j x (grad Phi^T U_j) + a_j (det grad Phi - 1) grad Phi^{-1} phi_j k_j;
    the relative gap is reported, not asserted.
    """
    if potential not in POTENTIALS:
        raise ValueError(f"unknown potential '{potential}', expected one of {POTENTIALS}")
    grid = scaffold.pieces[0].backflow.grid if scaffold.pieces else None
    if grid is None:
        raise GridMismatchError("scaffold has no stripes")
    nt = scaffold.times.size
    dt = float(scaffold.times[1] - scaffold.times[0]) if nt > 1 else 0.0

    def run(s: int) -> Tuple[Field, Field, float]:
        A, w0, wc_explicit = _sample_terms(scaffold, family, lam, s, grid, potential)
        w = curl(Field.vector(grid, A))
        w0_field = Field.vector(grid, w0)
        wc = w - w0_field
        scale = sup_norm(w)
        gap = float(np.max(np.abs(wc.samples() - wc_explicit))) / scale if scale > 0.0 else 0.0
        return w, w0_field, gap

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(run, range(nt)))
    else:
        results = [run(s) for s in range(nt)]

    t0 = float(scaffold.times[0])
    w = TimeSeriesField.from_fields([r[0] for r in results], t0, dt)
    w0 = TimeSeriesField.from_fields([r[1] for r in results], t0, dt)
    wc = w - w0
    out = Perturbation(
        w=w,
        w0=w0,
        wc=wc,
        dwdt=time_derivative(w),
        corrector_gap=max(r[2] for r in results),
        lam=lam,
    )

    if monitor is not None:
        monitor.context(stage=scaffold.q, step='perturb')
        div_max = float(np.max(np.abs(np.sum(grid.k * w.coeffs, axis=1))))
        monitor.check('perturbation_divergence', div_max, DIVERGENCE_TOLERANCE)
        w0_sup = max(sup_norm(f) for f in w0)
        wc_sup = max(sup_norm(f) for f in wc)
        if sp.M is not None:
            monitor.monitor('principal_amplitude', w0_sup, sp.M / 4.0 * math.sqrt(sp.delta_next))
        monitor.report(
            'corrector_ratio', wc_sup * sp.l * lam / w0_sup if w0_sup > 0.0 else 0.0
        )
        monitor.report('corrector_identity_gap', out.corrector_gap)
        if potential == 'table':
            monitor.report(
                'table_truncation_error',
                max(family.potential_truncation_error(j) for j in range(len(DIRECTIONS))),
            )
    logger.info(
        f"Perturbation q={scaffold.q}: lambda={lam}, {nt} samples, "
        f"corrector identity gap {out.corrector_gap:.3g}"
    )
    return out


def next_velocity(
    glued: GluedStage,
    perturbation: Perturbation,
    data: ProblemData,
    sp: StageParams,
    monitor: Optional[GateMonitor] = None,
) -> Tuple[TimeSeriesField, TimeSeriesField]:
    """v_{q+1} = v_bar + w_{q+1} and its time derivative."""
    v = glued.v + perturbation.w
    dvdt = glued.dvdt + perturbation.dwdt
    if monitor is not None:
        monitor.context(stage=glued.q + 1, step='velocity')
        grid = v.grid
        div_max = float(np.max(np.abs(np.sum(grid.k * v.coeffs, axis=1))))
        monitor.check('velocity_divergence', div_max, 1e-9)
        energy = VOLUME * np.sum(np.abs(v.coeffs) ** 2, axis=(1, 2, 3, 4))
        gap = data.energy(v.times) - energy
        monitor.monitor('energy_gap_upper', float(np.max(gap)), sp.delta_after)
        monitor.monitor(
            'energy_gap_lower',
            sp.delta_after * sp.lambda_next ** (-sp.alpha),
            float(np.min(gap)),
        )
    return v, dvdt
