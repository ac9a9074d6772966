"""Command-line entry point: ground-state, quench, sweep, predict, fit."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd
from pydantic import ValidationError

from analysis import compare_to_prediction, fit_power_law, saturation_guard
from config import ARTIFACT_DIR, LOG_LEVEL, PROFILE_CACHE_DIR, WORKERS
from defects import StopRule, take_census
from dynamics import LangevinParams, QuenchSchedule, default_dt, run_quench, write_snapshots
from equilibrium import critical_frequency_finite_N, load_or_solve
from errors import EXIT_CONFIG, EXIT_DATA_QUALITY, EXIT_OK, ConfigError, DomainError, IKZMError, WindowError
from models import SweepConfig
from predictors import ikzm_report
from sweep import particle_plan, run_sweep
from utils import charges_to_string, make_rng, read_json, write_json

logger = logging.getLogger(__name__)


def _parse_value(raw: str):
    if "," in raw:
        return [_parse_value(part) for part in raw.split(",") if part]
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="flat JSON run configuration")
    group = parser.add_argument_group("overrides (same names as the config keys)")
    for name in SweepConfig.model_fields:
        group.add_argument(f"--{name}", dest=f"override_{name}", metavar="VALUE")


def load_config(args: argparse.Namespace) -> SweepConfig:
    doc = read_json(args.config) if args.config else {}
    for name in SweepConfig.model_fields:
        raw = getattr(args, f"override_{name}", None)
        if raw is not None:
            doc[name] = _parse_value(raw)
    return SweepConfig.model_validate(doc)


def cmd_ground_state(args) -> int:
    profile = load_or_solve(args.n_ions, PROFILE_CACHE_DIR)
    print(f"✅ Ground state N={profile.n_ions}: L={profile.L:.6f} l0, a0={profile.a0:.6f} l0")
    print(f"   nu_c(0) = {profile.nu_c0_sq ** 0.5:.6f} nu", end="")
    if profile.n_ions >= 3:
        print(f" (finite-N estimate {critical_frequency_finite_N(profile.n_ions):.6f} nu)")
    else:
        print()
    if args.out:
        write_json(profile.to_doc(), args.out)
        print(f"Saved profile to {args.out}")
    return EXIT_OK


def cmd_quench(args) -> int:
    config = load_config(args)
    if config.tau_q is None:
        raise ConfigError("quench needs tau_q")
    plan = particle_plan(config)
    schedule = QuenchSchedule(nu_c0_sq=plan.ramp_center, delta0=plan.delta0, tau_q=config.tau_q)
    dt = config.dt if config.dt is not None else default_dt(schedule, config.eta)
    params = LangevinParams(eta=config.eta, noise_amp=config.noise_amp, dt=dt, seed=config.seed)
    stop = StopRule(reference=plan.reference, min_time=config.tau_q, window=plan.window,
                    target_fraction=config.target_fraction)
    result = run_quench(plan.profile, schedule, params, stop, plan.window, rng=make_rng(config.seed),
                        hold_time=config.hold_time, thermalize=config.thermalize,
                        snapshot_stride=config.snapshot_stride or None)
    census = take_census(result.state, stop, plan.window)
    print(f"✅ Quench tau_Q={config.tau_q:g} stopped at t={result.state.t:.4f} after {result.steps} steps")
    print(f"   defects: {census.n_defects} (density {census.density:.4f}), "
          f"charges {charges_to_string(census.charges) or '-'}")
    out = Path(args.out) if args.out else ARTIFACT_DIR / "quench"
    if result.snapshots:
        path = write_snapshots(result.snapshot_frame(), out / "snapshots.parquet")
        print(f"Saved snapshots to {path}")
    write_json({**census.to_row(0, config.tau_q, config.eta), "seed": config.seed,
                "t_stop": result.state.t, "steps": result.steps}, out / "census.json")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = load_config(args)
    out = Path(args.out) if args.out else ARTIFACT_DIR / "sweep"
    outcome = run_sweep(config, workers=args.workers, output_dir=out)
    fit = outcome.result.fit
    if fit is None:
        print(f"⚠️  No fit: {outcome.result.fit_error}")
    else:
        print(f"✅ Exponent {fit.exponent:.4f} (intercept {fit.intercept:.4f}, r = {fit.r:.4f}, "
              f"{fit.n_used} points)")
        if config.regime is not None:
            cmp = compare_to_prediction(fit, config.regime, config.geometry, config.tolerance)
            mark = "✅" if cmp.passed else "❌"
            print(f"{mark} predicted {cmp.predicted:.4f}, deviation {cmp.deviation:.4f} "
                  f"(tolerance {cmp.tolerance})")
    if outcome.result.saturation_tau:
        print(f"⚠️  Saturation suspected for tau_Q <= {outcome.result.saturation_tau[-1]:g}")
    print(f"Saved {', '.join(str(p) for p in outcome.paths)}")
    return EXIT_OK


def cmd_predict(args) -> int:
    config = load_config(args)
    if config.tau_q is None:
        raise ConfigError("predict needs tau_q")
    profile = load_or_solve(config.n_ions, PROFILE_CACHE_DIR)
    report = ikzm_report(profile, config.resolved_delta0(profile.nu_c0_sq), config.tau_q, config.eta)
    width = max(len(k) for k in report)
    for key, value in report.items():
        print(f"{key:<{width}}  {value:.6g}")
    return EXIT_OK


def cmd_fit(args) -> int:
    frame = pd.read_csv(args.csv)
    fit = fit_power_law(frame, args.fit_tau_min, args.fit_tau_max)
    print(f"✅ Exponent {fit.exponent:.4f} (intercept {fit.intercept:.4f}, r = {fit.r:.4f})")
    if fit.excluded_tau:
        print(f"   zero-density rows excluded: {fit.excluded_tau}")
    if len(frame) >= 5:
        flagged = saturation_guard(frame)
        if flagged:
            print(f"⚠️  Saturation suspected for tau_Q <= {flagged[-1]:g}; consider --fit_tau_min")
    if args.regime:
        cmp = compare_to_prediction(fit, args.regime, args.geometry, args.tolerance)
        mark = "✅" if cmp.passed else "❌"
        print(f"{mark} predicted {cmp.predicted:.4f}, deviation {cmp.deviation:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Linear-to-zigzag quench simulator and Kibble-Zurek analysis")
    parser.add_argument("--log-level", default=LOG_LEVEL)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ground-state", help="solve and cache the linear-chain ground state")
    p.add_argument("--n_ions", type=int, required=True)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_ground_state)

    p = sub.add_parser("quench", help="one seeded realization with snapshots and census")
    add_config_flags(p)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_quench)

    p = sub.add_parser("sweep", help="ensemble over the tau_Q grid")
    add_config_flags(p)
    p.add_argument("--workers", type=int, default=WORKERS)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("predict", help="closed-form Kibble-Zurek quantities")
    add_config_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("fit", help="re-fit an aggregate CSV")
    p.add_argument("--csv", type=Path, required=True)
    p.add_argument("--fit_tau_min", type=float)
    p.add_argument("--fit_tau_max", type=float)
    p.add_argument("--regime", choices=["overdamped", "underdamped"])
    p.add_argument("--geometry", choices=["trapped", "homogeneous"], default="trapped")
    p.add_argument("--tolerance", type=float, default=0.2)
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        return args.func(args)
    except (ConfigError, DomainError, WindowError, ValidationError, FileNotFoundError) as e:
        print(f"❌ Configuration error: {e}")
        return EXIT_CONFIG
    except IKZMError as e:
        print(f"❌ Data quality: {type(e).__name__}: {e}")
        return EXIT_DATA_QUALITY


if __name__ == "__main__":
    sys.exit(main())
