import math

import numpy as np
import pandas as pd
import pytest

from coulomb import IonState, potential_energy
from defects import StopRule, central_window, take_census, zigzag_reference
from dynamics import (FixedTrap, LangevinParams, QuenchSchedule, default_dt, integrate, ou_substep,
                      read_snapshots, run_quench, state_from_snapshot, step, transverse_frequency_sq,
                      write_snapshots)
from equilibrium import relax_zigzag
from errors import ConfigError, DomainError, IntegrationError, QuenchTimeoutError


def test_schedule_values():
    schedule = QuenchSchedule(nu_c0_sq=10.0, delta0=2.0, tau_q=5.0)
    assert schedule.t_start == -5.0
    assert transverse_frequency_sq(schedule, -5.0) == pytest.approx(12.0)
    assert transverse_frequency_sq(schedule, 0.0) == pytest.approx(10.0)
    assert transverse_frequency_sq(schedule, 2.5) == pytest.approx(9.0)
    assert transverse_frequency_sq(schedule, 5.0) == pytest.approx(8.0)
    assert schedule.nu_t_sq(40.0) == pytest.approx(8.0)
    with pytest.raises(DomainError):
        transverse_frequency_sq(schedule, -5.5)


@pytest.mark.parametrize("delta0, tau_q", [(0.0, 1.0), (1.0, 0.0), (-1.0, 2.0)])
def test_schedule_rejects_degenerate_ramps(delta0, tau_q):
    with pytest.raises(ConfigError):
        QuenchSchedule(nu_c0_sq=10.0, delta0=delta0, tau_q=tau_q)


def test_langevin_params():
    params = LangevinParams(eta=2.0, noise_amp=0.1, dt=0.01)
    assert params.kT == pytest.approx(0.0025)
    assert LangevinParams(eta=0.0, noise_amp=0.1, dt=0.01).kT == math.inf
    with pytest.raises(ConfigError):
        LangevinParams(eta=-1.0, noise_amp=0.1, dt=0.01)
    with pytest.raises(ConfigError):
        LangevinParams(eta=100.0, noise_amp=0.1, dt=0.01).check_stability(5.0)
    LangevinParams(eta=1.0, noise_amp=0.1, dt=0.01).check_stability(5.0)


def test_default_dt_respects_guards():
    schedule = QuenchSchedule(nu_c0_sq=96.0, delta0=4.0, tau_q=10.0)
    assert default_dt(schedule, eta=0.0) == pytest.approx(1e-3)
    assert default_dt(schedule, eta=100.0) == pytest.approx(5e-4)
    gentle = QuenchSchedule(nu_c0_sq=0.5, delta0=0.1, tau_q=10.0)
    assert default_dt(gentle, eta=0.1) == pytest.approx(0.01)


def test_ou_substep():
    vel = np.array([[1.0, -2.0]])
    assert np.allclose(ou_substep(vel, eta=0.0, noise_amp=0.0, dt=0.1), vel)
    assert np.allclose(ou_substep(vel, eta=2.0, noise_amp=0.0, dt=0.1), vel * math.exp(-0.2))
    kicked = ou_substep(vel, eta=0.0, noise_amp=0.5, dt=0.04, normals=np.ones_like(vel))
    assert np.allclose(kicked, vel + 0.1)
    sigma = math.sqrt(0.25 / 4.0 * -math.expm1(-0.4))
    damped = ou_substep(vel, eta=2.0, noise_amp=0.5, dt=0.1, normals=np.ones_like(vel))
    assert np.allclose(damped, vel * math.exp(-0.2) + sigma)


def _perturbed(profile, rng_seed=3, scale=0.02):
    rng = np.random.default_rng(rng_seed)
    pos = np.column_stack([profile.positions, np.zeros(profile.n_ions)])
    pos += scale * rng.standard_normal(pos.shape)
    return IonState(t=0.0, pos=pos, vel=np.zeros_like(pos))


def test_energy_conserved_without_bath(chain6):
    trap = FixedTrap(20.0)
    start = _perturbed(chain6)
    params = LangevinParams(eta=0.0, noise_amp=0.0, dt=1e-3)
    summary = integrate(start, trap, params, n_steps=10_000)
    e0 = potential_energy(start, 20.0) + start.kinetic_energy()
    e1 = potential_energy(summary.state, 20.0) + summary.state.kinetic_energy()
    assert abs(e1 - e0) / abs(e0) < 1e-4
    assert summary.state.t == pytest.approx(10.0)


def test_noise_stream_reproducible(chain6):
    trap = FixedTrap(20.0)
    start = _perturbed(chain6)
    params = LangevinParams(eta=1.0, noise_amp=0.1, dt=1e-3, seed=11)
    a = integrate(start, trap, params, n_steps=5000)
    b = integrate(start, trap, params, n_steps=5000)
    c = integrate(start, trap, LangevinParams(eta=1.0, noise_amp=0.1, dt=1e-3, seed=12), n_steps=5000)
    assert np.array_equal(a.state.pos, b.state.pos)
    assert not np.array_equal(a.state.pos, c.state.pos)


def test_single_step_matches_integrate(chain6):
    trap = FixedTrap(20.0)
    start = _perturbed(chain6)
    params = LangevinParams(eta=1.0, noise_amp=0.1, dt=1e-3, seed=5)
    one = step(start, trap, params, np.random.Generator(np.random.Philox(np.random.SeedSequence(5))))
    assert np.array_equal(one.pos, integrate(start, trap, params, n_steps=1).state.pos)
    assert one.t == pytest.approx(1e-3)


def test_equipartition_in_thermal_bath():
    pos = np.array([[-0.25 ** (1 / 3), 0.0], [0.25 ** (1 / 3), 0.0]])
    start = IonState(t=0.0, pos=pos, vel=np.zeros_like(pos))
    params = LangevinParams(eta=1.0, noise_amp=0.05, dt=0.01, seed=2024)
    summary = integrate(start, FixedTrap(4.0), params, n_steps=1_000_000)
    expected = 0.5 * params.kT
    assert expected == pytest.approx(6.25e-4)
    assert abs(summary.mean_kinetic_per_dof / expected - 1.0) < 0.05


def test_halving_the_step_leaves_the_bath_temperature_unbiased():
    pos = np.array([[-0.25 ** (1 / 3), 0.0], [0.25 ** (1 / 3), 0.0]])
    start = IonState(t=0.0, pos=pos, vel=None)
    measured = {}
    for dt in (0.01, 0.005):
        params = LangevinParams(eta=1.0, noise_amp=0.05, dt=dt, seed=31)
        summary = integrate(start, FixedTrap(4.0), params, n_steps=int(round(20_000.0 / dt)))
        measured[dt] = summary.mean_kinetic_per_dof / (0.5 * params.kT)
    assert abs(measured[0.01] - 1.0) < 0.05
    assert abs(measured[0.005] - 1.0) < 0.05
    assert abs(measured[0.01] - measured[0.005]) < 0.04
    # first-order extrapolation to dt -> 0
    assert abs(2.0 * measured[0.005] - measured[0.01] - 1.0) < 0.05


def test_order_swap_is_reported():
    pos = np.array([[-0.1, 0.0], [0.1, 0.0]])
    vel = np.array([[100.0, 0.0], [-100.0, 0.0]])
    start = IonState(t=0.0, pos=pos, vel=vel)
    params = LangevinParams(eta=0.0, noise_amp=0.0, dt=0.01)
    with pytest.raises(IntegrationError) as info:
        step(start, FixedTrap(4.0), params, np.random.default_rng(0))
    assert info.value.step == 1


def test_damped_relaxation_reaches_static_zigzag(chain20):
    nu_t_sq = 0.5 * chain20.nu_c0_sq
    seed = 1e-3 * (-1.0) ** np.arange(chain20.n_ions)
    start = IonState(t=0.0, pos=np.column_stack([chain20.positions, seed]), vel=None)
    params = LangevinParams(eta=5.0, noise_amp=0.0, dt=1e-3)
    summary = integrate(start, FixedTrap(nu_t_sq), params, n_steps=100_000)
    relaxed = relax_zigzag(chain20, nu_t_sq)
    central = slice(6, 14)
    assert np.allclose(summary.state.pos[central], relaxed.pos[central], atol=2e-3)


def test_non_crossing_quench_stays_linear(chain10):
    nu_c0_sq = chain10.nu_c0_sq
    schedule = QuenchSchedule(nu_c0_sq=2.0 * nu_c0_sq, delta0=0.1 * nu_c0_sq, tau_q=5.0)
    params = LangevinParams(eta=10.0, noise_amp=0.05, dt=default_dt(schedule, 10.0), seed=1)
    window = range(2, 8)
    stop = StopRule(reference=0.0, min_time=schedule.tau_q, window=window)
    result = run_quench(chain10, schedule, params, stop, window, snapshot_stride=None)
    assert result.stopped
    assert result.state.t == pytest.approx(schedule.tau_q, abs=params.dt)
    assert np.abs(result.state.y).max() < 0.02
    census = take_census(result.state, stop, window)
    assert census.n_defects == 0
    assert census.density == 0.0


def test_crossing_quench_with_snapshots(chain10, tmp_path):
    nu_c0_sq = chain10.nu_c0_sq
    schedule = QuenchSchedule(nu_c0_sq=nu_c0_sq, delta0=0.6 * nu_c0_sq, tau_q=20.0)
    window = central_window(chain10, schedule.nu_t_sq_final, 6)
    reference = zigzag_reference(chain10, schedule.nu_t_sq_final, window)
    assert reference > 0.0
    params = LangevinParams(eta=10.0, noise_amp=0.05, dt=default_dt(schedule, 10.0), seed=7)
    stop = StopRule(reference=reference, min_time=schedule.tau_q, window=window, target_fraction=0.7)
    checked = []
    result = run_quench(chain10, schedule, params, stop, window, snapshot_stride=2000,
                        on_check=lambda s: checked.append(s.t))
    assert result.stopped
    assert result.state.t >= schedule.tau_q
    assert checked and checked[-1] == pytest.approx(result.state.t)

    census = take_census(result.state, stop, window)
    assert census.density == pytest.approx(census.n_defects / len(window))
    assert all(window.start <= bond < window.stop - 1 for bond, _ in census.defects)

    frame = result.snapshot_frame()
    assert list(frame.columns[:3]) == ["t", "x_1", "x_2"]
    assert frame.shape[1] == 1 + 4 * chain10.n_ions
    assert frame["t"].iloc[0] == pytest.approx(-schedule.tau_q)
    assert frame["t"].iloc[-1] == pytest.approx(result.state.t)

    for name in ("snapshots.parquet", "snapshots.csv"):
        path = write_snapshots(frame, tmp_path / name)
        back = read_snapshots(path)
        pd.testing.assert_frame_equal(back, frame, check_exact=False, rtol=1e-15)
    restored = state_from_snapshot(frame.iloc[-1], chain10.n_ions)
    assert np.array_equal(restored.pos, result.state.pos)


def test_quench_timeout_reports_diagnostics(chain10):
    nu_c0_sq = chain10.nu_c0_sq
    schedule = QuenchSchedule(nu_c0_sq=2.0 * nu_c0_sq, delta0=0.1 * nu_c0_sq, tau_q=1.0)
    params = LangevinParams(eta=10.0, noise_amp=0.0, dt=default_dt(schedule, 10.0))
    stop = StopRule(reference=0.5, min_time=1.0, window=range(2, 8))
    with pytest.raises(QuenchTimeoutError) as info:
        run_quench(chain10, schedule, params, stop, range(2, 8), hold_time=1.0, snapshot_stride=None)
    assert info.value.diagnostics["reference"] == 0.5
    assert info.value.diagnostics["t"] >= 2.0 - 1e-9


def test_snapshot_version_checked(tmp_path):
    path = tmp_path / "old.csv"
    path.write_text("# ikzm.snapshot.version=0\nt,x_1\n0,1\n")
    with pytest.raises(ConfigError):
        read_snapshots(path)


@pytest.mark.slow
@pytest.mark.parametrize("eta, dt", [(1.0, 0.02), (5.0, 0.005)])
def test_equipartition_at_second_step_size(eta, dt):
    pos = np.array([[-0.25 ** (1 / 3), 0.0], [0.25 ** (1 / 3), 0.0]])
    start = IonState(t=0.0, pos=pos, vel=None)
    params = LangevinParams(eta=eta, noise_amp=0.05, dt=dt, seed=99)
    summary = integrate(start, FixedTrap(4.0), params, n_steps=2_000_000)
    assert abs(summary.mean_kinetic_per_dof / (0.5 * params.kT) - 1.0) < 0.05


@pytest.mark.slow
def test_adiabatic_limit_leaves_no_defects(chain50):
    schedule = QuenchSchedule(nu_c0_sq=chain50.nu_c0_sq, delta0=0.6 * chain50.nu_c0_sq, tau_q=10_000.0)
    window = central_window(chain50, schedule.nu_t_sq_final, 30)
    reference = zigzag_reference(chain50, schedule.nu_t_sq_final, window)
    clean = 0
    for seed in range(10):
        params = LangevinParams(eta=100.0, noise_amp=0.05, dt=default_dt(schedule, 100.0), seed=seed)
        stop = StopRule(reference=reference, min_time=schedule.tau_q, window=window)
        result = run_quench(chain50, schedule, params, stop, window, snapshot_stride=None)
        clean += take_census(result.state, stop, window).n_defects == 0
    assert clean >= 9
