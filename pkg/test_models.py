import json

import pytest
from pydantic import ValidationError

from config import CONFIG_DIR
from errors import ConfigError
from models import SweepConfig


def test_defaults():
    config = SweepConfig()
    assert config.n_ions == 50
    assert config.n_central == 30
    assert config.resolved_delta0(10.0) == pytest.approx(1.0)
    assert SweepConfig(delta0=2.5).resolved_delta0(10.0) == 2.5


def test_log_spaced_grid():
    grid = SweepConfig(tau_min=20.0, tau_decades=1.0, tau_per_decade=6).resolved_tau_grid()
    assert len(grid) == 7
    assert grid[0] == pytest.approx(20.0)
    assert grid[-1] == pytest.approx(200.0)
    assert grid[1] / grid[0] == pytest.approx(10 ** (1 / 6))
    assert SweepConfig(tau_grid=[1.0, 3.0]).resolved_tau_grid() == [1.0, 3.0]
    with pytest.raises(ConfigError):
        SweepConfig().resolved_tau_grid()


@pytest.mark.parametrize("doc", [
    {"tau_grid": [2.0, 1.0]},
    {"tau_grid": [1.0, 1.0]},
    {"tau_grid": [-1.0, 1.0]},
    {"n_ions": 10, "n_central": 12},
    {"realizations": 1},
    {"target_fraction": 1.0},
    {"model": "lattice"},
    {"unknown_key": 1},
])
def test_invalid_configs(doc):
    with pytest.raises(ValidationError):
        SweepConfig.model_validate(doc)


def test_master_seed_required():
    with pytest.raises(ConfigError):
        SweepConfig().require_master_seed()
    assert SweepConfig(master_seed=3).require_master_seed() == 3


@pytest.mark.parametrize("name", ["overdamped", "underdamped", "ring_overdamped", "ring_underdamped"])
def test_shipped_configs_validate(name):
    doc = json.loads((CONFIG_DIR / f"{name}.json").read_text())
    config = SweepConfig.model_validate(doc)
    assert config.master_seed is not None
    assert config.regime in ("overdamped", "underdamped")
    assert len(config.resolved_tau_grid()) >= 5
