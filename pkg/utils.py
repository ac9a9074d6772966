import json
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np
import pandas as pd

# Per-realization streams: SeedSequence entropy (master seed, tau index, realization index)
# feeding a Philox counter-based bit generator. Stable across numpy releases.


def realization_seed(master_seed: int, tau_index: int, realization: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), int(tau_index), int(realization)])


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seed))


def seed_key(seed) -> int:
    """Reduce a seed or SeedSequence to one 64-bit integer for reporting."""
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1, dtype=np.uint64)[0])
    return int(seed)


def log_spaced_grid(tau_min: float, decades: float, per_decade: int) -> List[float]:
    n_points = int(round(decades * per_decade)) + 1
    exponents = np.log10(tau_min) + np.arange(n_points) / per_decade
    return [float(v) for v in 10.0 ** exponents]


def charges_to_string(charges: Iterable[int]) -> str:
    return "".join("+" if c > 0 else "-" for c in charges)


def standard_error(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float("nan")
    return float(values.std(ddof=1) / np.sqrt(values.size))


def write_csv(df: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path


def write_json(doc: dict, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_json(path: Path) -> dict:
    with open(path) as fh:
        return json.load(fh)
