"""Simulation units, ion state and the trap + Coulomb potential.

Units: m = Q = nu = 1, l0^3 = Q^2 / (m nu^2) = 1. Frequencies are in units of the
axial frequency nu, lengths in l0 and times in 1/nu. The chain lives in the
(x, y) plane; z is frozen by the strong confinement along that axis.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from config import COINCIDENCE_TOL, N_CENTRAL, NOISE_AMP
from errors import CoincidentIonsError, ConfigError, DomainError
from kernels import coulomb_energy, coulomb_forces, total_forces


@dataclass(frozen=True)
class Units:
    m: float = 1.0
    Q: float = 1.0
    nu: float = 1.0

    @property
    def l0(self) -> float:
        return (self.Q ** 2 / (self.m * self.nu ** 2)) ** (1.0 / 3.0)

    def to_physical_length(self, value: float, l0_si: float) -> float:
        return value * l0_si

    def to_physical_time(self, value: float, nu_si: float) -> float:
        return value / nu_si

    def to_physical_frequency(self, value: float, nu_si: float) -> float:
        return value * nu_si


SIM_UNITS = Units()


@dataclass(frozen=True)
class IonState:
    t: float
    pos: np.ndarray
    vel: np.ndarray

    def __post_init__(self):
        pos = np.array(self.pos, dtype=float)
        vel = np.zeros_like(pos) if self.vel is None else np.array(self.vel, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 2:
            raise DomainError(f"positions must be an (N, 2) array with N >= 2, got {pos.shape}")
        if vel.shape != pos.shape:
            raise DomainError(f"velocities shape {vel.shape} does not match positions {pos.shape}")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel)) and np.isfinite(self.t)):
            raise DomainError("ion state contains non-finite entries")
        if np.any(np.diff(pos[:, 0]) <= 0.0):
            raise DomainError("axial coordinates must be strictly ascending")
        pos.setflags(write=False)
        vel.setflags(write=False)
        object.__setattr__(self, "pos", pos)
        object.__setattr__(self, "vel", vel)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n_ions(self) -> int:
        return self.pos.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.pos[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.pos[:, 1]

    def kinetic_energy(self) -> float:
        return 0.5 * float(np.sum(self.vel ** 2))

    def with_time(self, t: float) -> "IonState":
        return IonState(t=t, pos=self.pos, vel=self.vel)


@dataclass(frozen=True)
class TrapConfig:
    n_ions: int
    nu_c0_sq: float
    delta0: float
    tau_q: float
    eta: float
    noise_amp: float = NOISE_AMP
    n_central: int = N_CENTRAL
    nu_t_sq_center: Optional[float] = None

    def __post_init__(self):
        if self.n_ions < 2:
            raise ConfigError("n_ions must be >= 2")
        if self.delta0 <= 0.0 or self.tau_q <= 0.0:
            raise ConfigError("delta0 and tau_q must be positive")
        if self.eta < 0.0 or self.noise_amp < 0.0:
            raise ConfigError("eta and noise_amp must be non-negative")
        if not 0 < self.n_central <= self.n_ions:
            raise ConfigError("n_central must satisfy 0 < n_central <= n_ions")

    @property
    def ramp_center(self) -> float:
        return self.nu_c0_sq if self.nu_t_sq_center is None else self.nu_t_sq_center

    @property
    def nu_t_sq_initial(self) -> float:
        return self.ramp_center + self.delta0

    @property
    def nu_t_sq_final(self) -> float:
        return self.ramp_center - self.delta0


def _as_positions(state) -> np.ndarray:
    pos = state.pos if isinstance(state, IonState) else state
    return np.ascontiguousarray(pos, dtype=float)


def potential_energy(state, nu_t_sq: float) -> float:
    """Trap plus Coulomb energy, in m l0^2 nu^2."""
    pos = _as_positions(state)
    coulomb, rmin = coulomb_energy(pos)
    if rmin < COINCIDENCE_TOL:
        raise CoincidentIonsError(rmin)
    trap = 0.5 * float(np.sum(pos[:, 0] ** 2) + nu_t_sq * np.sum(pos[:, 1] ** 2))
    return trap + float(coulomb)


def forces(state, nu_t_sq: float) -> np.ndarray:
    """-grad V for every ion, shape (N, 2), in m l0 nu^2."""
    pos = _as_positions(state)
    out = np.empty_like(pos)
    rmin = total_forces(pos, float(nu_t_sq), out)
    if rmin < COINCIDENCE_TOL:
        raise CoincidentIonsError(rmin)
    return out


def coulomb_part(state) -> np.ndarray:
    pos = _as_positions(state)
    return coulomb_forces(pos, np.empty_like(pos))


def potential_hessian(state, nu_t_sq: float) -> np.ndarray:
    """Second derivatives of V, shape (2N, 2N), ordered (x_0, y_0, x_1, y_1, ...)."""
    pos = _as_positions(state)
    n = pos.shape[0]
    d = pos[:, None, :] - pos[None, :, :]
    r = np.sqrt(np.sum(d ** 2, axis=-1))
    np.fill_diagonal(r, np.inf)
    if r.min() < COINCIDENCE_TOL:
        raise CoincidentIonsError(float(r.min()))
    # d2(1/r)/dr_i dr_i for every pair; off-diagonal blocks carry the opposite sign
    pair = 3.0 * d[:, :, :, None] * d[:, :, None, :] / r[:, :, None, None] ** 5
    pair -= np.eye(2) / r[:, :, None, None] ** 3
    hess = -pair.transpose(0, 2, 1, 3).copy()
    idx = np.arange(n)
    hess[idx, :, idx, :] = pair.sum(axis=1) + np.diag([1.0, float(nu_t_sq)])
    return hess.reshape(2 * n, 2 * n)
