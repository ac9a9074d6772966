"""Compiled inner loops: Coulomb pair sums, the Langevin splitting integrator and its field analogue."""

import typing as tp

import numba
import numpy as np

NUMBA_OPTS: tp.Dict[str, tp.Any] = {
    "cache": True,
    "error_model": "numpy",
}

STATUS_OK = 0
STATUS_COINCIDENT = 1
STATUS_ORDER = 2
STATUS_NONFINITE = 3


def njit(func: tp.Callable):
    return numba.njit(func, **NUMBA_OPTS)


@njit
def coulomb_energy(pos):
    n = pos.shape[0]
    energy = 0.0
    rmin = np.inf
    for i in range(n - 1):
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            r = np.sqrt(dx * dx + dy * dy)
            if r < rmin:
                rmin = r
            energy += 1.0 / r
    return energy, rmin


@njit
def total_forces(pos, nu_t_sq, out):
    """Trap plus Coulomb force on every ion, written into ``out``.

    Single pass over i < j pairs. Returns the smallest pair separation.
    """
    n = pos.shape[0]
    for i in range(n):
        out[i, 0] = -pos[i, 0]
        out[i, 1] = -nu_t_sq * pos[i, 1]
    rmin = np.inf
    for i in range(n - 1):
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            r2 = dx * dx + dy * dy
            r = np.sqrt(r2)
            if r < rmin:
                rmin = r
            inv3 = 1.0 / (r2 * r)
            fx = dx * inv3
            fy = dy * inv3
            out[i, 0] += fx
            out[i, 1] += fy
            out[j, 0] -= fx
            out[j, 1] -= fy
    return rmin


@njit
def coulomb_forces(pos, out):
    total_forces(pos, 0.0, out)
    for i in range(pos.shape[0]):
        out[i, 0] += pos[i, 0]
    return out


@njit
def ramp_nu_t_sq(t, nu_c0_sq, delta0, tau_q, fixed):
    if not np.isnan(fixed):
        return fixed
    if t >= tau_q:
        return nu_c0_sq - delta0
    return nu_c0_sq - delta0 * t / tau_q


@njit
def langevin_chunk(pos, vel, forces, t0, dt, n_steps, eta, noise_amp, noise,
                   nu_c0_sq, delta0, tau_q, fixed, coincidence_tol):
    """Advance ``n_steps`` of half-kick, drift, Ornstein-Uhlenbeck, half-kick.

    ``forces`` must hold the force at (pos, t0) on entry and holds the force at
    the final state on exit. ``noise`` has shape (n_steps, N, 2) of standard
    normals, or zero length when the noise amplitude is zero.

    Returns (status, failing step offset, sum over steps of sum v^2).
    """
    n = pos.shape[0]
    half = 0.5 * dt
    if eta > 0.0:
        c = np.exp(-eta * dt)
        sigma = np.sqrt(noise_amp * noise_amp / (2.0 * eta) * -np.expm1(-2.0 * eta * dt))
    else:
        c = 1.0
        sigma = noise_amp * np.sqrt(dt)
    use_noise = noise_amp > 0.0 and noise.shape[0] > 0
    v2_sum = 0.0
    for k in range(n_steps):
        t_next = t0 + (k + 1) * dt
        for i in range(n):
            vel[i, 0] += half * forces[i, 0]
            vel[i, 1] += half * forces[i, 1]
            pos[i, 0] += dt * vel[i, 0]
            pos[i, 1] += dt * vel[i, 1]
            vel[i, 0] *= c
            vel[i, 1] *= c
            if use_noise:
                vel[i, 0] += sigma * noise[k, i, 0]
                vel[i, 1] += sigma * noise[k, i, 1]
        nu_sq = ramp_nu_t_sq(t_next, nu_c0_sq, delta0, tau_q, fixed)
        rmin = total_forces(pos, nu_sq, forces)
        if rmin < coincidence_tol:
            return STATUS_COINCIDENT, k, v2_sum
        for i in range(n):
            vel[i, 0] += half * forces[i, 0]
            vel[i, 1] += half * forces[i, 1]
            v2_sum += vel[i, 0] * vel[i, 0] + vel[i, 1] * vel[i, 1]
            if not (np.isfinite(pos[i, 0]) and np.isfinite(pos[i, 1])
                    and np.isfinite(vel[i, 0]) and np.isfinite(vel[i, 1])):
                return STATUS_NONFINITE, k, v2_sum
            if i > 0 and pos[i, 0] <= pos[i - 1, 0]:
                return STATUS_ORDER, k, v2_sum
    return STATUS_OK, n_steps, v2_sum


@njit
def field_forces(psi, h2, quartic, nu_c_sq, nu_sq, dx, periodic, out):
    """h^2 psi'' - delta psi - 2 A psi^3 with periodic or zero-ghost boundaries."""
    m = psi.shape[0]
    inv_dx2 = 1.0 / (dx * dx)
    for i in range(m):
        if i > 0:
            left = psi[i - 1]
        elif periodic:
            left = psi[m - 1]
        else:
            left = 0.0
        if i < m - 1:
            right = psi[i + 1]
        elif periodic:
            right = psi[0]
        else:
            right = 0.0
        lap = (left - 2.0 * psi[i] + right) * inv_dx2
        delta = nu_sq - nu_c_sq[i]
        out[i] = h2[i] * lap - delta * psi[i] - 2.0 * quartic[i] * psi[i] ** 3


@njit
def field_chunk(psi, dpsi, force, h2, quartic, nu_c_sq, noise_scale, dx, periodic,
                t0, dt, n_steps, eta, noise_amp, noise, nu_c0_sq, delta0, tau_q, fixed):
    """Same splitting as ``langevin_chunk`` for the coarse-grained field.

    Returns (status, failing step offset).
    """
    m = psi.shape[0]
    half = 0.5 * dt
    if eta > 0.0:
        c = np.exp(-eta * dt)
        sigma = np.sqrt(noise_amp * noise_amp / (2.0 * eta) * -np.expm1(-2.0 * eta * dt))
    else:
        c = 1.0
        sigma = noise_amp * np.sqrt(dt)
    use_noise = noise_amp > 0.0 and noise.shape[0] > 0
    for k in range(n_steps):
        for i in range(m):
            dpsi[i] += half * force[i]
            psi[i] += dt * dpsi[i]
            dpsi[i] *= c
            if use_noise:
                dpsi[i] += sigma * noise_scale[i] * noise[k, i]
        nu_sq = ramp_nu_t_sq(t0 + (k + 1) * dt, nu_c0_sq, delta0, tau_q, fixed)
        field_forces(psi, h2, quartic, nu_c_sq, nu_sq, dx, periodic, force)
        for i in range(m):
            dpsi[i] += half * force[i]
            if not (np.isfinite(psi[i]) and np.isfinite(dpsi[i])):
                return STATUS_NONFINITE, k
    return STATUS_OK, n_steps
