"""Damped, noise-driven ion dynamics under the transverse-frequency quench.

Noise convention: the Langevin force has white-noise strength eps per coordinate
component, <eps(t) eps(t')> = eps^2 delta(t - t'), which with the moment
relation <eps eps> = 2 eta kB T delta gives kB T = eps^2 / (2 m eta). The
Ornstein-Uhlenbeck substep is integrated exactly; with eta = 0 it reduces to
kicks of standard deviation eps sqrt(dt).
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Union

import numpy as np
import pandas as pd
import pyarrow as pa
import pyarrow.parquet as pq

from config import (COINCIDENCE_TOL, DT_DAMP_GUARD, DT_FREQ_GUARD, DT_STABILITY_LIMIT,
                    HOLD_TIME, NOISE_BLOCK_STEPS, SNAPSHOT_SCHEMA_VERSION, SNAPSHOT_STRIDE,
                    STOP_CHECK_EVERY, THERMALIZE_TIMES)
from coulomb import IonState, forces
from defects import StopRule, mean_abs_transverse, should_stop
from equilibrium import ChainProfile, linear_chain_state
from errors import ConfigError, DomainError, IntegrationError, QuenchTimeoutError
from kernels import STATUS_COINCIDENT, STATUS_NONFINITE, STATUS_OK, STATUS_ORDER, langevin_chunk
from utils import make_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuenchSchedule:
    """nu_t^2(t) = nu_c0^2 - delta0 t / tau_Q on [-tau_Q, tau_Q], held afterwards."""
    nu_c0_sq: float
    delta0: float
    tau_q: float

    def __post_init__(self):
        if self.delta0 <= 0.0 or self.tau_q <= 0.0:
            raise ConfigError("quench needs delta0 > 0 and tau_q > 0")

    @property
    def t_start(self) -> float:
        return -self.tau_q

    @property
    def nu_t_sq_initial(self) -> float:
        return self.nu_c0_sq + self.delta0

    @property
    def nu_t_sq_final(self) -> float:
        return self.nu_c0_sq - self.delta0

    def nu_t_sq(self, t: float) -> float:
        return transverse_frequency_sq(self, t)

    def kernel_args(self):
        return self.nu_c0_sq, self.delta0, self.tau_q, math.nan


@dataclass(frozen=True)
class FixedTrap:
    """Constant transverse frequency; used for relaxation and thermalization."""
    nu_t_sq_value: float

    t_start = -math.inf

    def nu_t_sq(self, t: float) -> float:
        return self.nu_t_sq_value

    def kernel_args(self):
        return 0.0, 1.0, 1.0, float(self.nu_t_sq_value)


def transverse_frequency_sq(schedule: QuenchSchedule, t: float) -> float:
    if t < schedule.t_start:
        raise DomainError(f"t = {t} precedes the quench start {schedule.t_start}")
    if t >= schedule.tau_q:
        return schedule.nu_c0_sq - schedule.delta0
    return schedule.nu_c0_sq - schedule.delta0 * t / schedule.tau_q


@dataclass(frozen=True)
class LangevinParams:
    eta: float
    noise_amp: float
    dt: float
    seed: int = 0

    def __post_init__(self):
        if self.eta < 0.0 or self.noise_amp < 0.0 or self.dt <= 0.0:
            raise ConfigError("need eta >= 0, noise_amp >= 0 and dt > 0")

    @property
    def kT(self) -> float:
        if self.eta == 0.0:
            return math.inf
        return self.noise_amp ** 2 / (2.0 * self.eta)

    def check_stability(self, nu_t_max: float) -> None:
        if self.dt * max(self.eta, nu_t_max) >= DT_STABILITY_LIMIT:
            raise ConfigError(
                f"dt = {self.dt:.3g} too large: dt*max(eta, nu_t) must stay below {DT_STABILITY_LIMIT}")


def default_dt(schedule: QuenchSchedule, eta: float) -> float:
    """Largest dt with dt nu_t(-tau_Q) <= 0.01, dt eta <= 0.05 and dt nu <= 0.01."""
    limits = [DT_FREQ_GUARD / math.sqrt(schedule.nu_t_sq_initial), DT_FREQ_GUARD]
    if eta > 0.0:
        limits.append(DT_DAMP_GUARD / eta)
    return min(limits)


def ou_substep(vel: np.ndarray, eta: float, noise_amp: float, dt: float,
               normals: Optional[np.ndarray] = None) -> np.ndarray:
    """Exact Ornstein-Uhlenbeck update of the velocities over dt."""
    if eta > 0.0:
        c = math.exp(-eta * dt)
        sigma = math.sqrt(noise_amp ** 2 / (2.0 * eta) * -math.expm1(-2.0 * eta * dt))
    else:
        c, sigma = 1.0, noise_amp * math.sqrt(dt)
    out = c * np.asarray(vel, dtype=float)
    if normals is not None and noise_amp > 0.0:
        out = out + sigma * normals
    return out


def _raise_for_status(status: int, step: int, t: float) -> None:
    if status == STATUS_ORDER:
        raise IntegrationError(f"axial order swap (t = {t:.6g})", step)
    if status == STATUS_NONFINITE:
        raise IntegrationError(f"non-finite coordinate (t = {t:.6g})", step)
    if status == STATUS_COINCIDENT:
        raise IntegrationError(f"ions collided (t = {t:.6g})", step)


class _Integrator:
    """Mutable working copy of a state, advanced in compiled chunks."""

    def __init__(self, state: IonState, schedule, params: LangevinParams, rng: np.random.Generator,
                 step_offset: int = 0):
        self.pos = np.array(state.pos, dtype=float)
        self.vel = np.array(state.vel, dtype=float)
        self.t = state.t
        self.schedule = schedule
        self.params = params
        self.rng = rng
        self.steps = step_offset
        self._taken = 0
        self.t0 = state.t
        self.forces = forces(self.pos, schedule.nu_t_sq(max(state.t, schedule.t_start)))
        self.v2_sum = 0.0
        self._empty_noise = np.empty((0, self.pos.shape[0], 2))

    def advance(self, n_steps: int) -> None:
        p = self.params
        done = 0
        while done < n_steps:
            block = min(NOISE_BLOCK_STEPS, n_steps - done)
            if p.noise_amp > 0.0:
                noise = self.rng.standard_normal((block, self.pos.shape[0], 2))
            else:
                noise = self._empty_noise
            status, offset, v2 = langevin_chunk(
                self.pos, self.vel, self.forces, self.t, p.dt, block, p.eta, p.noise_amp, noise,
                *self.schedule.kernel_args(), COINCIDENCE_TOL)
            self.v2_sum += v2
            if status != STATUS_OK:
                _raise_for_status(status, self.steps + offset + 1, self.t + (offset + 1) * p.dt)
            self.steps += block
            self._taken += block
            done += block
            self.t = self.t0 + self._taken * p.dt

    def state(self) -> IonState:
        return IonState(t=self.t, pos=self.pos.copy(), vel=self.vel.copy())


def step(state: IonState, schedule, params: LangevinParams, rng: np.random.Generator,
         step_index: int = 0) -> IonState:
    """One half-kick, drift, OU, half-kick step."""
    integrator = _Integrator(state, schedule, params, rng, step_offset=step_index)
    integrator.advance(1)
    return integrator.state()


@dataclass
class IntegrationSummary:
    state: IonState
    steps: int
    mean_kinetic_per_dof: float


def integrate(state: IonState, schedule, params: LangevinParams, n_steps: int,
              rng: Optional[np.random.Generator] = None) -> IntegrationSummary:
    """Advance n_steps and report the time-averaged kinetic energy per degree of freedom."""
    rng = make_rng(params.seed) if rng is None else rng
    integrator = _Integrator(state, schedule, params, rng)
    integrator.advance(n_steps)
    n_dof = integrator.pos.size
    return IntegrationSummary(
        state=integrator.state(),
        steps=n_steps,
        mean_kinetic_per_dof=0.5 * integrator.v2_sum / (n_steps * n_dof),
    )


@dataclass
class QuenchResult:
    state: IonState
    steps: int
    stopped: bool
    snapshots: List[np.ndarray] = field(default_factory=list)

    def snapshot_frame(self) -> pd.DataFrame:
        return snapshots_to_frame(self.snapshots, self.state.n_ions)


def _snapshot_row(integrator: _Integrator) -> np.ndarray:
    return np.concatenate([[integrator.t], integrator.pos[:, 0], integrator.pos[:, 1],
                           integrator.vel[:, 0], integrator.vel[:, 1]])


def run_quench(profile: ChainProfile, schedule: QuenchSchedule, params: LangevinParams,
               stop: Optional[StopRule], window: Optional[range] = None, *,
               rng: Optional[np.random.Generator] = None,
               hold_time: float = HOLD_TIME,
               thermalize: bool = True,
               snapshot_stride: Optional[int] = SNAPSHOT_STRIDE,
               check_every: int = STOP_CHECK_EVERY,
               on_check: Optional[Callable[[IonState], None]] = None) -> QuenchResult:
    """Ground state at t = -tau_Q, optional thermalization, ramp, hold until the stop rule fires.

    Without a stop rule the run ends at t = tau_Q + hold_time.
    """
    params.check_stability(math.sqrt(max(schedule.nu_t_sq_initial, 1.0)))
    rng = make_rng(params.seed) if rng is None else rng
    state = linear_chain_state(profile, t=schedule.t_start)
    window = range(profile.n_ions) if window is None else window

    if thermalize and params.eta > 0.0 and params.noise_amp > 0.0:
        n_therm = int(math.ceil(THERMALIZE_TIMES / params.eta / params.dt))
        warm = _Integrator(state, FixedTrap(schedule.nu_t_sq_initial), params, rng)
        warm.advance(n_therm)
        state = IonState(t=schedule.t_start, pos=warm.pos, vel=warm.vel)

    integrator = _Integrator(state, schedule, params, rng)
    snapshots: List[np.ndarray] = []
    if snapshot_stride:
        snapshots.append(_snapshot_row(integrator))

    ramp_steps = int(math.ceil(2.0 * schedule.tau_q / params.dt))
    cap_steps = ramp_steps + int(math.ceil(hold_time / params.dt))

    def advance_to(target: int) -> None:
        while integrator.steps < target:
            n = target - integrator.steps
            if snapshot_stride:
                n = min(n, snapshot_stride - integrator.steps % snapshot_stride)
            integrator.advance(n)
            if snapshot_stride and integrator.steps % snapshot_stride == 0:
                snapshots.append(_snapshot_row(integrator))

    advance_to(ramp_steps)
    stopped = False
    while True:
        current = integrator.state()
        if on_check is not None:
            on_check(current)
        if stop is not None and should_stop(current, stop, window):
            stopped = True
            break
        if integrator.steps >= cap_steps:
            break
        advance_to(min(integrator.steps + check_every, cap_steps))

    final = integrator.state()
    if stop is not None and not stopped:
        raise QuenchTimeoutError("stop rule never fired", {
            "t": final.t,
            "steps": integrator.steps,
            "mean_abs_y": mean_abs_transverse(final, window),
            "reference": stop.reference,
            "target_fraction": stop.target_fraction,
        })
    if snapshot_stride and (not snapshots or snapshots[-1][0] != final.t):
        snapshots.append(_snapshot_row(integrator))
    return QuenchResult(state=final, steps=integrator.steps, stopped=stopped, snapshots=snapshots)


def snapshot_columns(n_ions: int) -> List[str]:
    idx = range(1, n_ions + 1)
    return (["t"] + [f"x_{i}" for i in idx] + [f"y_{i}" for i in idx]
            + [f"vx_{i}" for i in idx] + [f"vy_{i}" for i in idx])


def snapshots_to_frame(rows: List[np.ndarray], n_ions: int) -> pd.DataFrame:
    data = np.vstack(rows) if rows else np.empty((0, 1 + 4 * n_ions))
    return pd.DataFrame(data, columns=snapshot_columns(n_ions))


def write_snapshots(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Parquet (with schema version metadata) or CSV, chosen by suffix."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".csv":
        with open(path, "w") as fh:
            fh.write(f"# ikzm.snapshot.version={SNAPSHOT_SCHEMA_VERSION}\n")
            frame.to_csv(fh, index=False, float_format="%.17g", lineterminator="\n")
        return path
    table = pa.Table.from_pandas(frame, preserve_index=False)
    metadata = dict(table.schema.metadata or {})
    metadata[b"ikzm.snapshot.version"] = str(SNAPSHOT_SCHEMA_VERSION).encode()
    pq.write_table(table.replace_schema_metadata(metadata), path)
    return path


def read_snapshots(path: Union[str, Path]) -> pd.DataFrame:
    path = Path(path)
    if path.suffix == ".csv":
        with open(path) as fh:
            header = fh.readline().strip()
        version = header.split("=", 1)[1] if header.startswith("# ikzm.snapshot.version=") else None
        frame = pd.read_csv(path, comment="#")
    else:
        table = pq.read_table(path)
        raw = (table.schema.metadata or {}).get(b"ikzm.snapshot.version")
        version = raw.decode() if raw is not None else None
        frame = table.to_pandas()
    if version != str(SNAPSHOT_SCHEMA_VERSION):
        raise ConfigError(f"unsupported snapshot version {version!r} in {path}")
    return frame


def state_from_snapshot(row: pd.Series, n_ions: int) -> IonState:
    cols = snapshot_columns(n_ions)
    values = row[cols].to_numpy(dtype=float)
    n = n_ions
    pos = np.column_stack([values[1:1 + n], values[1 + n:1 + 2 * n]])
    vel = np.column_stack([values[1 + 2 * n:1 + 3 * n], values[1 + 3 * n:1 + 4 * n]])
    return IonState(t=values[0], pos=pos, vel=vel)
