"""Ensemble aggregation, power-law fits and comparison with the closed-form exponents."""

import logging
from typing import Iterable, List, Optional, Union

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression

from config import FIT_TOLERANCE, SATURATION_GROWTH
from errors import InsufficientDataError
from models import Comparison, FitResult, ScalingResult, ScalingRow
from predictors import expected_exponent

logger = logging.getLogger(__name__)

RAW_COLUMNS = ["task_id", "tau_index", "tau_Q", "realization_id", "seed", "status",
               "n_defects", "density", "charges", "steps", "t_stop"]
AGGREGATE_COLUMNS = ["tau_Q", "mean_density", "std_error", "n_valid", "n_excluded"]

Rows = Union[pd.DataFrame, Iterable[ScalingRow]]


def aggregate_rows(raw: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard error of the density per tau_Q over realizations with status 'ok'."""
    valid = raw["status"] == "ok"
    grouped = raw[valid].groupby("tau_Q")["density"]
    agg = pd.DataFrame({
        "mean_density": grouped.mean(),
        # sample standard deviation / sqrt(n)
        "std_error": grouped.std(ddof=1) / np.sqrt(grouped.count()),
        "n_valid": grouped.count(),
    })
    excluded = (~valid).groupby(raw["tau_Q"]).sum().rename("n_excluded")
    agg = agg.reindex(excluded.index).join(excluded)
    agg["n_valid"] = agg["n_valid"].fillna(0).astype(int)
    agg["n_excluded"] = agg["n_excluded"].astype(int)
    return agg.reset_index().sort_values("tau_Q", ignore_index=True)[AGGREGATE_COLUMNS]


def rows_frame(rows: Rows) -> pd.DataFrame:
    if isinstance(rows, pd.DataFrame):
        return rows.sort_values("tau_Q", ignore_index=True)
    frame = pd.DataFrame([r.model_dump() for r in rows])
    if frame.empty:
        return pd.DataFrame(columns=AGGREGATE_COLUMNS)
    return frame.sort_values("tau_Q", ignore_index=True)


def frame_to_rows(frame: pd.DataFrame) -> List[ScalingRow]:
    return [ScalingRow(**rec) for rec in frame[AGGREGATE_COLUMNS].to_dict(orient="records")]


def fit_power_law(rows: Rows, tau_min: Optional[float] = None, tau_max: Optional[float] = None) -> FitResult:
    """Least squares of log d against log(1 / tau_Q); the slope is the exponent."""
    frame = rows_frame(rows)
    inside = np.ones(len(frame), dtype=bool)
    if tau_min is not None:
        inside &= frame["tau_Q"].to_numpy() >= tau_min
    if tau_max is not None:
        inside &= frame["tau_Q"].to_numpy() <= tau_max
    frame = frame[inside]
    positive = frame["mean_density"] > 0
    excluded = frame.loc[~positive, "tau_Q"].tolist()
    if excluded:
        logger.info("excluding %d zero-density rows from the fit: %s", len(excluded), excluded)
    used = frame[positive]
    if len(used) < 3:
        raise InsufficientDataError(f"need at least 3 rows with positive density, have {len(used)}")

    X = np.log(1.0 / used["tau_Q"].to_numpy()).reshape(-1, 1)
    y = np.log(used["mean_density"].to_numpy())
    model = LinearRegression().fit(X, y)
    r = float(np.clip(np.corrcoef(X[:, 0], y)[0, 1], -1.0, 1.0))
    return FitResult(
        exponent=float(model.coef_[0]),
        intercept=float(model.intercept_),
        r=r,
        n_used=len(used),
        excluded_tau=excluded,
    )


def saturation_guard(rows: Rows, growth: float = SATURATION_GROWTH) -> List[float]:
    """tau_Q values at the fast-quench end where d stops growing; suggested exclusions only.

    A step counts as growing when d rises by at least ``growth`` per halving of
    tau_Q, whatever the grid spacing.
    """
    frame = rows_frame(rows)
    if len(frame) < 5:
        raise InsufficientDataError("saturation check needs at least 5 rows")
    d = frame["mean_density"].to_numpy()
    tau = frame["tau_Q"].to_numpy()
    flagged = []
    for i in range(len(d) - 1):
        if d[i] >= (1.0 + growth) ** np.log2(tau[i + 1] / tau[i]) * d[i + 1]:
            break
        flagged.append(float(tau[i]))
    if flagged:
        logger.warning("density saturates for tau_Q <= %.4g (%d rows)", flagged[-1], len(flagged))
    return flagged


def compare_to_prediction(result: Union[ScalingResult, FitResult, float], regime: str, geometry: str,
                          tolerance: float = FIT_TOLERANCE) -> Comparison:
    if isinstance(result, ScalingResult):
        if result.fit is None:
            raise InsufficientDataError(result.fit_error or "no fit available")
        fitted = result.fit.exponent
    elif isinstance(result, FitResult):
        fitted = result.exponent
    else:
        fitted = float(result)
    predicted = expected_exponent(regime, geometry)
    deviation = abs(fitted - predicted)
    return Comparison(
        regime=regime,
        geometry=geometry,
        fitted=fitted,
        predicted=predicted,
        deviation=deviation,
        tolerance=tolerance,
        passed=deviation <= tolerance,
    )
