"""Linear-chain ground states, the local density picture and critical frequencies."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import brentq

from config import (GROUND_STATE_GTOL, GROUND_STATE_MAX_ITER, PROFILE_CACHE_DIR, PROFILE_SCHEMA_VERSION,
                    ZETA3, ZETA5, ZIGZAG_ACCEPT_GTOL, ZIGZAG_GTOL, ZIGZAG_LATTICE_TERMS, ZIGZAG_MAX_ITER)
from coulomb import IonState, forces, potential_energy, potential_hessian
from errors import ConfigError, ConvergenceError, DomainError
from utils import read_json, write_json

logger = logging.getLogger(__name__)

THERMODYNAMIC_FACTOR = math.sqrt(7.0 * ZETA3 / 2.0)
QUARTIC_FACTOR = 93.0 * ZETA5 / 32.0


@dataclass(frozen=True)
class ChainProfile:
    positions: np.ndarray
    L: float
    a0: float
    omega0: float
    nu_c0_sq: float

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float)
        positions.setflags(write=False)
        object.__setattr__(self, "positions", positions)

    @property
    def n_ions(self) -> int:
        return self.positions.size

    def _scaled(self, x) -> np.ndarray:
        X = np.asarray(x, dtype=float) / self.L
        if np.any(np.abs(X) >= 1.0):
            raise DomainError(f"position outside the chain |x| < L = {self.L:.6g}")
        return X

    def local_a(self, x):
        """LDA spacing anchored at the solved central gap: a(x) = a0 / (1 - (x/L)^2)."""
        X = self._scaled(x)
        return self.a0 / (1.0 - X ** 2)

    def local_omega0(self, x):
        return self.local_a(x) ** -1.5

    def local_nu_c_sq(self, x):
        return self.nu_c0_sq * (1.0 - self._scaled(x) ** 2) ** 3

    def to_doc(self) -> dict:
        return {
            "version": PROFILE_SCHEMA_VERSION,
            "n_ions": self.n_ions,
            "positions": [float(v) for v in self.positions],
            "L": self.L,
            "a0": self.a0,
            "omega0": self.omega0,
            "nu_c0_sq": self.nu_c0_sq,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ChainProfile":
        if doc.get("version") != PROFILE_SCHEMA_VERSION:
            raise ConfigError(f"unsupported chain profile version {doc.get('version')!r}")
        return cls(
            positions=np.asarray(doc["positions"], dtype=float),
            L=float(doc["L"]),
            a0=float(doc["a0"]),
            omega0=float(doc["omega0"]),
            nu_c0_sq=float(doc["nu_c0_sq"]),
        )


def _axial_energy(x: np.ndarray) -> float:
    iu = np.triu_indices(x.size, k=1)
    return 0.5 * float(np.sum(x ** 2)) + float(np.sum(1.0 / np.abs(x[iu[0]] - x[iu[1]])))


def _axial_grad_hess(x: np.ndarray):
    d = x[:, None] - x[None, :]
    r = np.abs(d)
    np.fill_diagonal(r, np.inf)
    inv2 = 1.0 / r ** 2
    inv3 = 1.0 / r ** 3
    grad = x - np.sum(np.sign(d) * inv2, axis=1)
    hess = -2.0 * inv3
    np.fill_diagonal(hess, 1.0 + 2.0 * np.sum(inv3, axis=1))
    return grad, hess


def central_gap(x: np.ndarray) -> float:
    n = x.size
    if n % 2 == 0:
        return float(x[n // 2] - x[n // 2 - 1])
    c = n // 2
    return float(0.5 * (x[c + 1] - x[c - 1]))


def solve_ground_state(n_ions: int, gtol: float = GROUND_STATE_GTOL,
                       max_iter: int = GROUND_STATE_MAX_ITER) -> ChainProfile:
    """Axial equilibrium of the linear chain by damped Newton descent.

    The ordered-chain energy is strictly convex, so Newton steps with
    backtracking that keeps the axial order converge deterministically.
    """
    if n_ions < 2:
        raise DomainError("a chain needs at least two ions")
    half_length = max(np.cbrt(3.0 * n_ions * np.log(n_ions)), 0.5)
    x = np.linspace(-half_length, half_length, n_ions)
    energy = _axial_energy(x)
    grad_norm = np.inf
    for iteration in range(max_iter):
        grad, hess = _axial_grad_hess(x)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < gtol:
            break
        step = cho_solve(cho_factor(hess), grad)
        t = 1.0
        while True:
            trial = x - t * step
            if np.all(np.diff(trial) > 0.0):
                trial_energy = _axial_energy(trial)
                if trial_energy <= energy + 1e-12 * abs(energy):
                    break
            t *= 0.5
            if t < 1e-12:
                raise ConvergenceError("line search failed in ground-state solver", grad_norm)
        x, energy = trial, trial_energy
    else:
        raise ConvergenceError(f"ground state not converged after {max_iter} iterations", grad_norm)

    x = 0.5 * (x - x[::-1])
    grad_norm = float(np.linalg.norm(_axial_grad_hess(x)[0]))
    if grad_norm >= gtol:
        raise ConvergenceError("symmetrized ground state lost convergence", grad_norm)
    logger.debug("ground state N=%d converged in %d iterations, |g|=%.2e", n_ions, iteration, grad_norm)

    a0 = central_gap(x)
    return ChainProfile(
        positions=x,
        L=float(x[-1]),
        a0=a0,
        omega0=a0 ** -1.5,
        nu_c0_sq=4.0 / a0 ** 3,
    )


def load_or_solve(n_ions: int, cache_dir: Optional[Path] = PROFILE_CACHE_DIR) -> ChainProfile:
    if cache_dir is None:
        return solve_ground_state(n_ions)
    path = Path(cache_dir) / f"chain_N{n_ions}.json"
    if path.exists():
        try:
            return ChainProfile.from_doc(read_json(path))
        except (ConfigError, KeyError, ValueError) as exc:
            logger.warning("ignoring stale profile cache %s: %s", path, exc)
    profile = solve_ground_state(n_ions)
    write_json(profile.to_doc(), path)
    return profile


def local_density(x, n_ions: int, L: float):
    """Local density approximation n(x) = (3N / 4L)(1 - x^2 / L^2)."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= L):
        raise DomainError(f"position outside the chain |x| < L = {L:.6g}")
    return 0.75 * n_ions / L * (1.0 - (x / L) ** 2)


def critical_frequency_finite_N(n_ions: float) -> float:
    """nu_t^(c) ~ 3 N nu / (4 sqrt(log N)), corrections in powers of 1/log N."""
    if n_ions < 3 and n_ions != math.e:
        raise DomainError("finite-N critical frequency needs N >= 3")
    return 3.0 * n_ions / (4.0 * math.sqrt(math.log(n_ions)))


def local_critical_frequency(profile: ChainProfile, x, form: str = "closed"):
    """Squared local critical frequency.

    ``form="spacing"`` evaluates 4 Q^2 / (m a(x)^3); ``form="closed"`` evaluates
    nu_c0^2 [1 - (x/L)^2]^3. They coincide for the anchored LDA spacing.
    """
    if form == "spacing":
        return 4.0 / profile.local_a(x) ** 3
    if form == "closed":
        return profile.local_nu_c_sq(x)
    raise ValueError(f"unknown form {form!r}")


def thermodynamic_critical_frequency(a: float) -> float:
    if a <= 0.0:
        raise DomainError("spacing must be positive")
    return a ** -1.5 * THERMODYNAMIC_FACTOR


def quartic_coefficient(a):
    """A = (93 zeta(5) / 32) omega0^2 / a^2 with omega0^2 = Q^2 / (m a^3)."""
    a = np.asarray(a, dtype=float)
    return QUARTIC_FACTOR / a ** 5


def stationary_zigzag_amplitude(profile: ChainProfile, x, nu_t_sq: float):
    """rho(x) = sqrt(-delta(x) / 2 A(x)); zero where the chain is linear."""
    a = profile.local_a(x)
    delta = nu_t_sq - 4.0 / a ** 3
    rho = np.sqrt(np.clip(-delta, 0.0, None) / (2.0 * quartic_coefficient(a)))
    return float(rho) if np.ndim(rho) == 0 else rho


_ODD = 2.0 * np.arange(ZIGZAG_LATTICE_TERMS) + 1.0
_ODD_TAIL = 7.0 * ZETA3 / 8.0 - float(np.sum(_ODD ** -3))


def uniform_zigzag_displacement(a: float, nu_t_sq: float, exact: bool = True) -> float:
    """Per-ion |y| of an infinite zigzag y_i = +-b at axial spacing a.

    The alternating mode softens at nu_c^2 = 7 zeta(3) / (2 a^3). ``exact=False``
    keeps the quartic order of the lattice sums, which is the GL value rho / 2;
    ``exact=True`` solves the full stationarity condition for b.
    """
    if a <= 0.0 or nu_t_sq <= 0.0:
        raise DomainError("spacing and transverse frequency must be positive")
    delta = nu_t_sq - THERMODYNAMIC_FACTOR ** 2 / a ** 3
    if delta >= 0.0:
        return 0.0
    if not exact:
        return 0.5 * math.sqrt(-delta / (2.0 * float(quartic_coefficient(a))))

    def reduced_force(b):
        return nu_t_sq - 4.0 * (float(np.sum(((_ODD * a) ** 2 + 4.0 * b * b) ** -1.5)) + _ODD_TAIL / a ** 3)

    upper = a
    while reduced_force(upper) < 0.0:
        upper *= 2.0
    return float(brentq(reduced_force, 0.0, upper, xtol=1e-14 * a))


def central_spacing(state: IonState, half_width: int = 2) -> float:
    """Mean axial gap over the 2 * half_width - 1 gaps around the chain center."""
    x = np.sort(state.x)
    c = x.size // 2
    lo, hi = max(c - half_width, 0), min(c + half_width, x.size - 1)
    return float((x[hi] - x[lo]) / (hi - lo))


def linear_chain_state(profile: ChainProfile, t: float = 0.0) -> IonState:
    pos = np.column_stack([profile.positions, np.zeros(profile.n_ions)])
    return IonState(t=t, pos=pos, vel=np.zeros_like(pos))


def _newton_step(hess: np.ndarray, grad: np.ndarray) -> np.ndarray:
    shift = 0.0
    scale = float(np.abs(np.diag(hess)).max())
    while True:
        try:
            return cho_solve(cho_factor(hess + shift * np.eye(hess.shape[0])), grad)
        except LinAlgError:
            shift = 1e-6 * scale if shift == 0.0 else 10.0 * shift


def relax_zigzag(profile: ChainProfile, nu_t_sq: float, seed_amplitude: Optional[float] = None,
                 gtol: float = ZIGZAG_GTOL, max_iter: int = ZIGZAG_MAX_ITER) -> IonState:
    """Noise-free relaxation of a seeded perfect zigzag in a fixed trap.

    Damped Newton on the full (x, y) potential from y_i = (-1)^i b0, shifted
    towards gradient descent wherever the Hessian is not positive definite.
    Stops once the largest force component drops below ``gtol``.
    """
    n = profile.n_ions
    if seed_amplitude is None:
        seed_amplitude = max(uniform_zigzag_displacement(profile.a0, nu_t_sq), 0.05 * profile.a0)
    pos = np.column_stack([profile.positions, seed_amplitude * (-1.0) ** np.arange(n)])
    energy = potential_energy(pos, nu_t_sq)
    grad = -forces(pos, nu_t_sq).ravel()
    grad_max = float(np.abs(grad).max())
    for iteration in range(max_iter):
        if grad_max < gtol:
            break
        step = _newton_step(potential_hessian(pos, nu_t_sq), grad).reshape(n, 2)
        t = 1.0
        while t > 1e-10:
            trial = pos - t * step
            if np.all(np.diff(trial[:, 0]) > 0.0):
                trial_energy = potential_energy(trial, nu_t_sq)
                trial_grad = -forces(trial, nu_t_sq).ravel()
                trial_max = float(np.abs(trial_grad).max())
                # energy differences vanish in round-off next to the minimum
                if trial_energy < energy - 1e-14 * abs(energy) or (
                        trial_energy <= energy + 1e-12 * abs(energy) and trial_max < grad_max):
                    break
            t *= 0.5
        else:
            break
        pos, energy, grad, grad_max = trial, trial_energy, trial_grad, trial_max
    if grad_max > ZIGZAG_ACCEPT_GTOL:
        raise ConvergenceError(f"zigzag relaxation stalled after {iteration + 1} Newton steps", grad_max)
    logger.debug("zigzag relaxed at nu_t^2=%.6g in %d steps, max|F|=%.2e", nu_t_sq, iteration, grad_max)
    return IonState(t=0.0, pos=pos, vel=np.zeros_like(pos))
