"""Full ensemble runs of the shipped configurations. Hours of CPU; run with --runslow."""

import json

import pytest

from analysis import compare_to_prediction, fit_power_law
from config import CONFIG_DIR, WORKERS
from models import SweepConfig
from sweep import run_sweep


def _run(name, tmp_path):
    config = SweepConfig.model_validate(json.loads((CONFIG_DIR / f"{name}.json").read_text()))
    outcome = run_sweep(config, workers=WORKERS, output_dir=tmp_path / name)
    assert outcome.result.fit is not None, outcome.result.fit_error
    fit = outcome.result.fit
    saturated = outcome.result.saturation_tau
    if saturated:
        # refit above the flagged fast-quench points
        fit = fit_power_law(outcome.aggregate, tau_min=saturated[-1] * 1.0001)
    assert fit.r > 0.95
    return compare_to_prediction(fit, config.regime, config.geometry, config.tolerance)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["overdamped", "underdamped", "ring_overdamped", "ring_underdamped"])
def test_exponent_matches_closed_form(name, tmp_path):
    comparison = _run(name, tmp_path)
    assert comparison.passed, comparison
