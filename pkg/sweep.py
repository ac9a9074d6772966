"""Ensembles of seeded quenches over a tau_Q grid, aggregated into a scaling result."""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from analysis import AGGREGATE_COLUMNS, RAW_COLUMNS, aggregate_rows, fit_power_law, frame_to_rows, saturation_guard
from config import CODE_VERSION, MAX_EXCLUDED_FRACTION, PROFILE_CACHE_DIR, SUMMARY_SCHEMA_VERSION
from defects import StopRule, central_window, centermost_indices, take_census, zigzag_reference
from dynamics import LangevinParams, QuenchSchedule, default_dt, run_quench
from equilibrium import ChainProfile, load_or_solve
from errors import (DataQualityError, IndeterminateCensusError, InsufficientDataError, IntegrationError,
                    QuenchTimeoutError)
from field_gl import GLCoefficients, build_coefficients, run_field_quench
from models import ScalingResult, SweepConfig
from utils import charges_to_string, make_rng, realization_seed, seed_key, write_csv, write_json

logger = logging.getLogger(__name__)


@dataclass
class ParticlePlan:
    """Everything a particle realization needs that does not depend on tau_Q."""
    profile: ChainProfile
    ramp_center: float
    delta0: float
    window: range
    reference: float


@dataclass
class FieldPlan:
    coeffs: GLCoefficients
    ramp_center: float
    delta0: float


@dataclass
class SweepOutcome:
    result: ScalingResult
    raw: pd.DataFrame
    aggregate: pd.DataFrame
    summary: dict
    paths: List[Path] = field(default_factory=list)


def counting_window(profile: ChainProfile, nu_t_sq_final: float, n_central: int) -> range:
    """Central window; the plain centermost ions when the quench never crosses."""
    if nu_t_sq_final >= profile.nu_c0_sq:
        return centermost_indices(profile.n_ions, n_central)
    return central_window(profile, nu_t_sq_final, n_central)


def particle_plan(config: SweepConfig, profile: Optional[ChainProfile] = None,
                  cache_dir: Optional[Path] = PROFILE_CACHE_DIR) -> ParticlePlan:
    profile = load_or_solve(config.n_ions, cache_dir) if profile is None else profile
    center = config.nu_t_sq_center if config.nu_t_sq_center is not None else profile.nu_c0_sq
    delta0 = config.resolved_delta0(profile.nu_c0_sq)
    final = center - delta0
    window = counting_window(profile, final, config.n_central)
    reference = zigzag_reference(profile, final, window) if final < profile.nu_c0_sq else 0.0
    logger.info("particle plan: N=%d, window %d..%d, delta0=%.6g, reference <|y|>=%.6g",
                profile.n_ions, window.start, window.stop - 1, delta0, reference)
    return ParticlePlan(profile=profile, ramp_center=center, delta0=delta0, window=window,
                        reference=reference)


def field_plan(config: SweepConfig, profile: Optional[ChainProfile] = None,
               cache_dir: Optional[Path] = PROFILE_CACHE_DIR) -> FieldPlan:
    if config.geometry == "homogeneous":
        coeffs = build_coefficients(config.ring_spacing, n_nodes=config.ring_nodes)
    else:
        profile = load_or_solve(config.n_ions, cache_dir) if profile is None else profile
        coeffs = build_coefficients(profile)
    nu_c_max = float(coeffs.nu_c_sq.max())
    center = config.nu_t_sq_center if config.nu_t_sq_center is not None else nu_c_max
    return FieldPlan(coeffs=coeffs, ramp_center=center, delta0=config.resolved_delta0(nu_c_max))


def run_particle_realization(plan: ParticlePlan, config: SweepConfig, tau_q: float,
                             seed: np.random.SeedSequence) -> dict:
    schedule = QuenchSchedule(nu_c0_sq=plan.ramp_center, delta0=plan.delta0, tau_q=tau_q)
    dt = config.dt if config.dt is not None else default_dt(schedule, config.eta)
    params = LangevinParams(eta=config.eta, noise_amp=config.noise_amp, dt=dt, seed=seed_key(seed))
    stop = StopRule(reference=plan.reference, min_time=tau_q, window=plan.window,
                    target_fraction=config.target_fraction)
    result = run_quench(plan.profile, schedule, params, stop, plan.window, rng=make_rng(seed),
                        hold_time=config.hold_time, thermalize=config.thermalize, snapshot_stride=None)
    census = take_census(result.state, stop, plan.window)
    return {
        "n_defects": census.n_defects,
        "density": census.density,
        "charges": charges_to_string(census.charges),
        "steps": result.steps,
        "t_stop": result.state.t,
    }


def run_field_realization(plan: FieldPlan, config: SweepConfig, tau_q: float,
                          seed: np.random.SeedSequence) -> dict:
    schedule = QuenchSchedule(nu_c0_sq=plan.ramp_center, delta0=plan.delta0, tau_q=tau_q)
    result = run_field_quench(plan.coeffs, schedule, config.eta, config.noise_amp, make_rng(seed),
                              dt=config.dt, target_fraction=config.target_fraction,
                              hold_time=config.hold_time, thermalize=config.thermalize)
    return {
        "n_defects": result.n_defects,
        "density": result.density,
        "charges": charges_to_string(result.charges),
        "steps": result.steps,
        "t_stop": result.state.t,
    }


def _run_task(plan, config: SweepConfig, task: Tuple[int, int, float, int]) -> dict:
    task_id, tau_index, tau_q, realization = task
    seed = realization_seed(config.master_seed, tau_index, realization)
    row = {
        "task_id": task_id,
        "tau_index": tau_index,
        "tau_Q": tau_q,
        "realization_id": realization,
        "seed": seed_key(seed),
    }
    runner = run_field_realization if isinstance(plan, FieldPlan) else run_particle_realization
    try:
        row.update(status="ok", **runner(plan, config, tau_q, seed))
    except QuenchTimeoutError as exc:
        row.update(status="timeout", n_defects=-1, density=math.nan, charges="", steps=-1,
                   t_stop=exc.diagnostics.get("t", math.nan))
    except IntegrationError as exc:
        row.update(status="integration_error", n_defects=-1, density=math.nan, charges="",
                   steps=exc.step, t_stop=math.nan)
    except IndeterminateCensusError:
        row.update(status="indeterminate", n_defects=-1, density=math.nan, charges="", steps=-1,
                   t_stop=math.nan)
    return row


def check_exclusions(aggregate: pd.DataFrame, realizations: int) -> None:
    worst = aggregate["n_excluded"].max() if len(aggregate) else 0
    if worst > MAX_EXCLUDED_FRACTION * realizations:
        bad = aggregate.loc[aggregate["n_excluded"] > MAX_EXCLUDED_FRACTION * realizations, "tau_Q"]
        raise DataQualityError(
            f"more than {MAX_EXCLUDED_FRACTION:.0%} of realizations excluded at tau_Q = {bad.tolist()}")


def run_sweep(config: SweepConfig, workers: int = 1, output_dir: Optional[Path] = None,
              profile: Optional[ChainProfile] = None,
              cache_dir: Optional[Path] = PROFILE_CACHE_DIR) -> SweepOutcome:
    """Run every (tau_Q, realization) task, aggregate, fit, and optionally write the artifacts.

    Results are ordered by task id, so the output is independent of the worker count.
    """
    master_seed = config.require_master_seed()
    grid = config.resolved_tau_grid()
    plan = (field_plan(config, profile, cache_dir) if config.model == "field"
            else particle_plan(config, profile, cache_dir))
    tasks = [(k * config.realizations + r, k, tau, r)
             for k, tau in enumerate(grid) for r in range(config.realizations)]
    logger.info("sweep: %d tau_Q points x %d realizations, master seed %d, %d workers",
                len(grid), config.realizations, master_seed, workers)

    rows = Parallel(n_jobs=workers)(delayed(_run_task)(plan, config, task) for task in tasks)
    raw = pd.DataFrame(rows).sort_values("task_id", ignore_index=True)[RAW_COLUMNS]
    aggregate = aggregate_rows(raw)
    paths: List[Path] = []
    if output_dir is not None:
        output_dir = Path(output_dir)
        paths.append(write_csv(raw, output_dir / "raw.csv"))
        paths.append(write_csv(aggregate, output_dir / "aggregate.csv"))
    for rec in aggregate[aggregate["n_excluded"] > 0].itertuples():
        logger.warning("tau_Q=%.6g: %d realizations excluded", rec.tau_Q, rec.n_excluded)
    check_exclusions(aggregate, config.realizations)

    result = ScalingResult(rows=frame_to_rows(aggregate))
    try:
        result.fit = fit_power_law(aggregate, config.fit_tau_min, config.fit_tau_max)
    except InsufficientDataError as exc:
        logger.warning("no fit: %s", exc)
        result.fit_error = str(exc)
    if len(aggregate) >= 5 and (aggregate["mean_density"] > 0).all():
        result.saturation_tau = saturation_guard(aggregate)

    summary = {
        "version": SUMMARY_SCHEMA_VERSION,
        "code_version": CODE_VERSION,
        "config": config.model_dump(),
        "tau_grid": grid,
        "seeding": "SeedSequence([master_seed, tau_index, realization]) -> Philox",
        "result": result.model_dump(),
    }
    if output_dir is not None:
        paths.append(write_json(summary, output_dir / "summary.json"))
    return SweepOutcome(result=result, raw=raw, aggregate=aggregate[AGGREGATE_COLUMNS], summary=summary,
                        paths=paths)
