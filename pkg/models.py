from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config import (DELTA0_FRACTION, FIT_TOLERANCE, HOLD_TIME, N_CENTRAL, N_IONS, NOISE_AMP,
                    SNAPSHOT_STRIDE, STOP_FRACTION, TAU_DECADES, TAU_PER_DECADE)
from errors import ConfigError
from utils import log_spaced_grid


class SweepConfig(BaseModel):
    """Flat run configuration: trap, noise, quench grid, ensemble and fit window."""
    model_config = ConfigDict(extra="forbid")

    # trap
    n_ions: int = Field(N_IONS, ge=2)
    n_central: int = Field(N_CENTRAL, ge=2)
    delta0: Optional[float] = Field(None, gt=0)
    delta0_fraction: float = Field(DELTA0_FRACTION, gt=0)
    nu_t_sq_center: Optional[float] = Field(None, gt=0)
    # Langevin
    eta: float = Field(100.0, ge=0)
    noise_amp: float = Field(NOISE_AMP, ge=0)
    dt: Optional[float] = Field(None, gt=0)
    seed: int = 0
    # single quench
    tau_q: Optional[float] = Field(None, gt=0)
    hold_time: float = Field(HOLD_TIME, gt=0)
    thermalize: bool = True
    target_fraction: float = Field(STOP_FRACTION, gt=0, lt=1)
    snapshot_stride: int = Field(SNAPSHOT_STRIDE, ge=0)
    # ensemble
    master_seed: Optional[int] = None
    tau_grid: Optional[List[float]] = None
    tau_min: Optional[float] = Field(None, gt=0)
    tau_decades: float = Field(TAU_DECADES, gt=0)
    tau_per_decade: int = Field(TAU_PER_DECADE, ge=1)
    realizations: int = Field(2, ge=2)
    model: Literal["particles", "field"] = "particles"
    geometry: Literal["trapped", "homogeneous"] = "trapped"
    ring_spacing: float = Field(1.0, gt=0)
    ring_nodes: int = Field(400, ge=3)
    # analysis
    fit_tau_min: Optional[float] = None
    fit_tau_max: Optional[float] = None
    regime: Optional[Literal["overdamped", "underdamped"]] = None
    tolerance: float = Field(FIT_TOLERANCE, gt=0)

    @field_validator("tau_grid")
    @classmethod
    def _strictly_increasing(cls, v):
        if v is not None:
            if len(v) < 1 or any(t <= 0 for t in v):
                raise ValueError("tau_grid needs positive entries")
            if any(b <= a for a, b in zip(v, v[1:])):
                raise ValueError("tau_grid must be strictly increasing")
        return v

    @model_validator(mode="after")
    def _window_fits(self):
        if self.n_central > self.n_ions:
            raise ValueError("n_central cannot exceed n_ions")
        return self

    def resolved_tau_grid(self) -> List[float]:
        if self.tau_grid is not None:
            return list(self.tau_grid)
        if self.tau_min is None:
            raise ConfigError("give either tau_grid or tau_min")
        return log_spaced_grid(self.tau_min, self.tau_decades, self.tau_per_decade)

    def resolved_delta0(self, nu_c0_sq: float) -> float:
        return self.delta0 if self.delta0 is not None else self.delta0_fraction * nu_c0_sq

    def require_master_seed(self) -> int:
        if self.master_seed is None:
            raise ConfigError("master_seed is required for a sweep")
        return self.master_seed


class ScalingRow(BaseModel):
    tau_Q: float
    mean_density: float
    std_error: float
    n_valid: int
    n_excluded: int = 0


class FitResult(BaseModel):
    exponent: float
    intercept: float
    r: float = Field(ge=-1.0, le=1.0)
    n_used: int
    excluded_tau: List[float] = []


class ScalingResult(BaseModel):
    rows: List[ScalingRow]
    fit: Optional[FitResult] = None
    fit_error: Optional[str] = None
    saturation_tau: List[float] = []


class Comparison(BaseModel):
    regime: str
    geometry: str
    fitted: float
    predicted: float
    deviation: float
    tolerance: float
    passed: bool


# API payloads
class GroundStateRequest(BaseModel):
    n_ions: int = Field(ge=2, le=2000)


class GroundStateResponse(BaseModel):
    n_ions: int
    positions: List[float]
    L: float
    a0: float
    omega0: float
    nu_c0: float
    nu_c0_finite_N: Optional[float] = None


class PredictRequest(BaseModel):
    n_ions: int = Field(N_IONS, ge=3, le=2000)
    tau_q: float = Field(gt=0)
    eta: float = Field(ge=0)
    delta0: Optional[float] = Field(None, gt=0)
    delta0_fraction: float = Field(DELTA0_FRACTION, gt=0)


class PredictResponse(BaseModel):
    report: Dict[str, Optional[float]]


class FitRequest(BaseModel):
    rows: List[ScalingRow]
    fit_tau_min: Optional[float] = None
    fit_tau_max: Optional[float] = None


class CompareRequest(BaseModel):
    exponent: float
    regime: Literal["overdamped", "underdamped"]
    geometry: Literal["trapped", "homogeneous"]
    tolerance: float = Field(FIT_TOLERANCE, gt=0)
