"""Coarse-grained Ginzburg-Landau model of the zigzag order parameter.

    psi_tt - h(x)^2 psi_xx + eta psi_t + delta(x, t) psi + 2 A(x) psi^3 = eps(t)

with h = omega0 a sqrt(log 2), A = (93 zeta(5) / 32) omega0^2 / a^2 and
delta(x, t) = nu_t^2(t) - nu_c^2(x). psi is the separation of the two zigzag rows.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import spsolve

from config import (DT_DAMP_GUARD, FIELD_CFL, FIELD_EDGE_FRACTION, HOLD_TIME, NOISE_BLOCK_STEPS,
                    SIGN_FLOOR_FRACTION, STOP_CHECK_EVERY, STOP_FRACTION, THERMALIZE_TIMES)
from defects import sign_changes, signs_with_floor
from dynamics import FixedTrap, QuenchSchedule
from equilibrium import QUARTIC_FACTOR, THERMODYNAMIC_FACTOR, ChainProfile
from errors import ConfigError, DomainError, IntegrationError, QuenchTimeoutError
from kernels import STATUS_OK, field_chunk, field_forces
from utils import make_rng

logger = logging.getLogger(__name__)

LOG2_SQRT = math.sqrt(math.log(2.0))


@dataclass(frozen=True)
class GLCoefficients:
    grid: np.ndarray
    dx: float
    rho: np.ndarray
    h: np.ndarray
    A: np.ndarray
    nu_c_sq: np.ndarray
    periodic: bool

    def __post_init__(self):
        if np.any(self.A <= 0.0):
            raise DomainError("quartic coefficient must be positive")
        for name in ("grid", "rho", "h", "A", "nu_c_sq"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return self.grid.size

    @property
    def length(self) -> float:
        return self.n_nodes * self.dx if self.periodic else (self.n_nodes + 1) * self.dx

    def delta(self, nu_t_sq: float) -> np.ndarray:
        return nu_t_sq - self.nu_c_sq

    def stationary_amplitude(self, nu_t_sq: float) -> np.ndarray:
        return np.sqrt(np.clip(-self.delta(nu_t_sq), 0.0, None) / (2.0 * self.A))

    def noise_scale(self) -> np.ndarray:
        return 1.0 / np.sqrt(self.rho * self.dx)


def ring_coefficients(a: float, n_nodes: int, dx: Optional[float] = None) -> GLCoefficients:
    """Homogeneous chain of spacing a closed into a ring; nu_c^2 is the infinite-chain value."""
    if a <= 0.0 or n_nodes < 3:
        raise DomainError("ring needs a > 0 and at least three nodes")
    dx = 0.5 * a if dx is None else dx
    omega0 = a ** -1.5
    ones = np.ones(n_nodes)
    return GLCoefficients(
        grid=np.arange(n_nodes) * dx,
        dx=dx,
        rho=ones / a,
        h=ones * omega0 * a * LOG2_SQRT,
        A=ones * QUARTIC_FACTOR * omega0 ** 2 / a ** 2,
        nu_c_sq=ones * (THERMODYNAMIC_FACTOR * omega0) ** 2,
        periodic=True,
    )


def trapped_coefficients(profile: ChainProfile, dx: Optional[float] = None,
                         edge_fraction: float = FIELD_EDGE_FRACTION) -> GLCoefficients:
    """LDA coefficients on a symmetric grid; psi is clamped to zero beyond edge_fraction * L."""
    dx = 0.5 * profile.a0 if dx is None else dx
    if dx > profile.a0:
        raise ConfigError(f"grid spacing {dx:.4g} exceeds the central spacing {profile.a0:.4g}")
    half = int(math.floor(edge_fraction * profile.L / dx))
    if half < 1:
        raise ConfigError("grid too coarse for the chain")
    x = np.arange(-half, half + 1) * dx
    if abs(x[-1]) >= edge_fraction * profile.L:
        x = x[1:-1]
    a = profile.local_a(x)
    omega0 = a ** -1.5
    return GLCoefficients(
        grid=x,
        dx=dx,
        rho=1.0 / a,
        h=omega0 * a * LOG2_SQRT,
        A=QUARTIC_FACTOR * omega0 ** 2 / a ** 2,
        nu_c_sq=profile.local_nu_c_sq(x),
        periodic=False,
    )


def build_coefficients(source: Union[ChainProfile, float], n_nodes: Optional[int] = None,
                       dx: Optional[float] = None) -> GLCoefficients:
    """Trapped coefficients from a ChainProfile, ring coefficients from a spacing."""
    if isinstance(source, ChainProfile):
        return trapped_coefficients(source, dx=dx)
    if n_nodes is None:
        raise ConfigError("a ring needs n_nodes")
    return ring_coefficients(float(source), n_nodes, dx=dx)


@dataclass
class FieldState:
    t: float
    psi: np.ndarray
    dpsi: np.ndarray
    periodic: bool

    def __post_init__(self):
        self.psi = np.array(self.psi, dtype=float)
        self.dpsi = np.zeros_like(self.psi) if self.dpsi is None else np.array(self.dpsi, dtype=float)
        if self.psi.shape != self.dpsi.shape or self.psi.ndim != 1:
            raise DomainError("field and its time derivative must be matching 1D arrays")
        if not (np.all(np.isfinite(self.psi)) and np.all(np.isfinite(self.dpsi))):
            raise DomainError("field state contains non-finite entries")


def check_cfl(coeffs: GLCoefficients, dt: float) -> None:
    courant = dt * float(coeffs.h.max()) / coeffs.dx
    if courant >= FIELD_CFL:
        raise ConfigError(f"CFL violated: dt max(h)/dx = {courant:.3g} >= {FIELD_CFL}")


def default_field_dt(coeffs: GLCoefficients, schedule: QuenchSchedule, eta: float) -> float:
    """Half the CFL bound, capped by the damping and the deepest |delta| the ramp reaches."""
    limits = [0.5 * FIELD_CFL * coeffs.dx / float(coeffs.h.max())]
    if eta > 0.0:
        limits.append(DT_DAMP_GUARD / eta)
    delta_scale = max(float(np.abs(coeffs.delta(schedule.nu_t_sq_initial)).max()),
                      float(np.abs(coeffs.delta(schedule.nu_t_sq_final)).max()))
    if delta_scale > 0.0:
        limits.append(DT_DAMP_GUARD / math.sqrt(2.0 * delta_scale))
    return min(limits)


def forces_on_field(state: FieldState, coeffs: GLCoefficients, nu_t_sq: float) -> np.ndarray:
    out = np.empty_like(state.psi)
    field_forces(state.psi, np.asarray(coeffs.h) ** 2, coeffs.A, coeffs.nu_c_sq, float(nu_t_sq),
                 coeffs.dx, coeffs.periodic, out)
    return out


class _FieldIntegrator:

    def __init__(self, state: FieldState, coeffs: GLCoefficients, schedule, eta: float,
                 noise_amp: float, dt: float, rng: np.random.Generator):
        check_cfl(coeffs, dt)
        if state.psi.size != coeffs.n_nodes:
            raise DomainError("field size does not match the coefficient grid")
        self.psi = state.psi.copy()
        self.dpsi = state.dpsi.copy()
        self.t0 = state.t
        self.t = state.t
        self._taken = 0
        self.coeffs = coeffs
        self.schedule = schedule
        self.eta, self.noise_amp, self.dt = eta, noise_amp, dt
        self.rng = rng
        self.h2 = np.asarray(coeffs.h) ** 2
        self.noise_scale = coeffs.noise_scale()
        self.force = forces_on_field(state, coeffs, schedule.nu_t_sq(state.t))
        self._empty_noise = np.empty((0, coeffs.n_nodes))

    def advance(self, n_steps: int) -> None:
        done = 0
        while done < n_steps:
            block = min(NOISE_BLOCK_STEPS, n_steps - done)
            if self.noise_amp > 0.0:
                noise = self.rng.standard_normal((block, self.coeffs.n_nodes))
            else:
                noise = self._empty_noise
            status, offset = field_chunk(
                self.psi, self.dpsi, self.force, self.h2, self.coeffs.A, self.coeffs.nu_c_sq,
                self.noise_scale, self.coeffs.dx, self.coeffs.periodic, self.t, self.dt, block,
                self.eta, self.noise_amp, noise, *self.schedule.kernel_args())
            if status != STATUS_OK:
                raise IntegrationError(f"non-finite field (t = {self.t + (offset + 1) * self.dt:.6g})",
                                       self._taken + offset + 1)
            self._taken += block
            done += block
            self.t = self.t0 + self._taken * self.dt

    def state(self) -> FieldState:
        return FieldState(t=self.t, psi=self.psi.copy(), dpsi=self.dpsi.copy(),
                          periodic=self.coeffs.periodic)


def step_field(state: FieldState, coeffs: GLCoefficients, schedule, eta: float, noise_amp: float,
               dt: float, rng: np.random.Generator) -> FieldState:
    integrator = _FieldIntegrator(state, coeffs, schedule, eta, noise_amp, dt, rng)
    integrator.advance(1)
    return integrator.state()


def evolve_field(state: FieldState, coeffs: GLCoefficients, schedule, eta: float, noise_amp: float,
                 dt: float, n_steps: int, rng: Optional[np.random.Generator] = None) -> FieldState:
    integrator = _FieldIntegrator(state, coeffs, schedule, eta, noise_amp, dt,
                                  make_rng(0) if rng is None else rng)
    integrator.advance(n_steps)
    return integrator.state()


def field_energy(state: FieldState, coeffs: GLCoefficients, nu_t_sq: float) -> float:
    """Kinetic + gradient + potential energy; conserved by the noise-free, undamped dynamics when h is uniform."""
    psi = state.psi
    if coeffs.periodic:
        grad = (np.roll(psi, -1) - psi) / coeffs.dx
        grad_energy = np.sum(coeffs.rho * coeffs.h ** 2 * grad ** 2)
    else:
        padded = np.concatenate([[0.0], psi, [0.0]])
        grad = np.diff(padded) / coeffs.dx
        weight = np.concatenate([coeffs.rho * coeffs.h ** 2, [coeffs.rho[-1] * coeffs.h[-1] ** 2]])
        grad_energy = np.sum(weight * grad ** 2)
    density = (coeffs.rho * state.dpsi ** 2 + coeffs.rho * coeffs.delta(nu_t_sq) * psi ** 2
               + coeffs.rho * coeffs.A * psi ** 4)
    return 0.5 * coeffs.dx * float(np.sum(density) + grad_energy)


def static_response(coeffs: GLCoefficients, delta: float, node: int, source: float = 1.0) -> np.ndarray:
    """Solve (-h^2 d_x^2 + delta) psi = source at one node, linear phase only."""
    if delta <= 0.0:
        raise DomainError("static response needs delta > 0 (linear phase)")
    m = coeffs.n_nodes
    h2 = np.asarray(coeffs.h) ** 2 / coeffs.dx ** 2
    main = 2.0 * h2 + delta
    off_lower = -h2[1:]
    off_upper = -h2[:-1]
    if coeffs.periodic:
        matrix = diags([main, off_upper, off_lower, [-h2[-1]], [-h2[0]]],
                       [0, 1, -1, -(m - 1), m - 1], format="csc")
    else:
        matrix = diags([main, off_upper, off_lower], [0, 1, -1], format="csc")
    rhs = np.zeros(m)
    rhs[node] = source / coeffs.dx
    return spsolve(matrix, rhs)


def correlation_length(response: np.ndarray, node: int, dx: float, max_distance: Optional[int] = None,
                       rel_floor: float = 1e-10) -> float:
    """Decay length of |psi| away from the perturbed node, from a log-linear least squares fit."""
    response = np.abs(np.asarray(response, dtype=float))
    m = response.size
    max_distance = m // 4 if max_distance is None else max_distance
    peak = response[node]
    k = np.arange(1, max_distance + 1)
    right = (node + k) % m
    values = response[right]
    keep = values > rel_floor * peak
    if np.count_nonzero(keep) < 3:
        raise DomainError("response decays too fast to fit a length")
    slope, _ = np.polyfit(k[keep] * dx, np.log(values[keep]), 1)
    return float(-1.0 / slope)


@dataclass
class FieldQuenchResult:
    state: FieldState
    n_defects: int
    charges: List[int]
    density: float
    region: Tuple[int, int]
    steps: int = 0


def counting_region(coeffs: GLCoefficients, nu_t_sq_final: float) -> np.ndarray:
    """Nodes that would order adiabatically; the whole ring when periodic."""
    if coeffs.periodic:
        return np.arange(coeffs.n_nodes)
    nodes = np.flatnonzero(coeffs.nu_c_sq > nu_t_sq_final)
    if nodes.size < 2:
        raise ConfigError("no part of the field crosses criticality")
    return np.arange(nodes[0], nodes[-1] + 1)


def count_field_defects(psi: np.ndarray, region: np.ndarray, periodic: bool,
                        floor: Optional[float] = None) -> List[Tuple[int, int, int]]:
    values = np.asarray(psi)[region]
    if floor is None:
        floor = SIGN_FLOOR_FRACTION * float(np.mean(np.abs(values)))
    if floor <= 0.0:
        return []
    return sign_changes(signs_with_floor(values, floor), periodic=periodic)


def run_field_quench(coeffs: GLCoefficients, schedule: QuenchSchedule, eta: float, noise_amp: float,
                     rng: Optional[np.random.Generator] = None, *, dt: Optional[float] = None,
                     target_fraction: float = STOP_FRACTION, hold_time: float = HOLD_TIME,
                     thermalize: bool = True, check_every: int = STOP_CHECK_EVERY) -> FieldQuenchResult:
    """Quench from psi = 0 at t = -tau_Q; count sign changes once <|psi|> reaches the stop fraction."""
    rng = make_rng(0) if rng is None else rng
    dt = default_field_dt(coeffs, schedule, eta) if dt is None else dt
    nu_final = schedule.nu_t_sq_final
    region = counting_region(coeffs, nu_final) if np.any(coeffs.nu_c_sq > nu_final) else None
    state = FieldState(t=schedule.t_start, psi=np.zeros(coeffs.n_nodes), dpsi=None,
                       periodic=coeffs.periodic)

    if thermalize and eta > 0.0 and noise_amp > 0.0:
        warm = _FieldIntegrator(state, coeffs, FixedTrap(schedule.nu_t_sq_initial), eta, noise_amp, dt, rng)
        warm.advance(int(math.ceil(THERMALIZE_TIMES / eta / dt)))
        state = FieldState(t=schedule.t_start, psi=warm.psi, dpsi=warm.dpsi, periodic=coeffs.periodic)

    integrator = _FieldIntegrator(state, coeffs, schedule, eta, noise_amp, dt, rng)
    integrator.advance(int(math.ceil(2.0 * schedule.tau_q / dt)))
    if region is None:
        return FieldQuenchResult(state=integrator.state(), n_defects=0, charges=[], density=0.0,
                                 region=(0, -1), steps=integrator._taken)

    reference = float(np.mean(coeffs.stationary_amplitude(nu_final)[region]))
    cap = integrator._taken + int(math.ceil(hold_time / dt))
    while float(np.mean(np.abs(integrator.psi[region]))) < target_fraction * reference:
        if integrator._taken >= cap:
            raise QuenchTimeoutError("field never reached the stop fraction", {
                "t": integrator.t,
                "mean_abs_psi": float(np.mean(np.abs(integrator.psi[region]))),
                "reference": reference,
            })
        integrator.advance(min(check_every, cap - integrator._taken))

    defects = count_field_defects(integrator.psi, region, coeffs.periodic)
    length = region.size * coeffs.dx
    return FieldQuenchResult(
        state=integrator.state(),
        n_defects=len(defects),
        charges=[sigma for _, _, sigma in defects],
        density=len(defects) / length,
        region=(int(region[0]), int(region[-1])),
        steps=integrator._taken,
    )
