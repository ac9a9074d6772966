"""Closed-form Kibble-Zurek estimates for homogeneous and trapped chains.

All quantities are in simulation units. a and omega0 are the central spacing
and the corresponding frequency scale, omega0^2 = Q^2 / (m a^3).
"""

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from config import REGIME_MARGIN, X_STAR_LIMIT, XI0
from equilibrium import ChainProfile, critical_frequency_finite_N, thermodynamic_critical_frequency
from errors import AmbiguousRegimeError, DivergentFrontError, DomainError, IKZMValidityWarning

logger = logging.getLogger(__name__)

OVERDAMPED = "overdamped"
UNDERDAMPED = "underdamped"
HOMOGENEOUS = "homogeneous"
TRAPPED = "trapped"
REGIMES = (OVERDAMPED, UNDERDAMPED)
GEOMETRIES = (HOMOGENEOUS, TRAPPED)

# Predicted exponent of d against 1 / tau_Q
EXPECTED_EXPONENTS = {
    (OVERDAMPED, TRAPPED): 1.0,
    (UNDERDAMPED, TRAPPED): 4.0 / 3.0,
    (OVERDAMPED, HOMOGENEOUS): 0.25,
    (UNDERDAMPED, HOMOGENEOUS): 1.0 / 3.0,
}


@dataclass(frozen=True)
class IKZMInputs:
    delta0: float
    tau_q: float
    eta: float
    a: float = 1.0
    omega0: float = 1.0
    L: float = 1.0
    nu_c0_sq: float = 1.0
    xi0: float = XI0

    def __post_init__(self):
        if self.delta0 <= 0.0 or self.tau_q <= 0.0:
            raise DomainError("delta0 and tau_q must be positive")
        if self.eta < 0.0 or self.a <= 0.0 or self.omega0 <= 0.0:
            raise DomainError("eta must be non-negative, a and omega0 positive")

    @classmethod
    def from_profile(cls, profile: ChainProfile, delta0: float, tau_q: float, eta: float) -> "IKZMInputs":
        return cls(delta0=delta0, tau_q=tau_q, eta=eta, a=profile.a0, omega0=profile.omega0,
                   L=profile.L, nu_c0_sq=profile.nu_c0_sq)

    @property
    def sound_scale(self) -> float:
        return self.a * self.omega0


@dataclass(frozen=True)
class FreezeOut:
    regime: str
    t_hat: float
    xi_hat: float
    v_hat: float


def _check_X(X):
    X = np.asarray(X, dtype=float)
    if np.any(np.abs(X) >= 1.0):
        raise DomainError("scaled position must satisfy |X| < 1")
    return X


def front_velocity(X, p: IKZMInputs):
    """v_F = L delta0 / (6 nu_c0^2 tau_Q) / (|X| (1 - X^2)^2)."""
    X = _check_X(X)
    if np.any(X == 0.0):
        raise DivergentFrontError("front velocity diverges at the trap centre")
    v = p.L * p.delta0 / (6.0 * p.nu_c0_sq * p.tau_q) / (np.abs(X) * (1.0 - X ** 2) ** 2)
    return float(v) if np.ndim(v) == 0 else v


def front_time(X, p: IKZMInputs):
    """Time at which delta(x, t) = 0: t_F = tau_Q [nu_c0^2 - nu_c^2(x)] / delta0."""
    X = _check_X(X)
    t = p.tau_q * p.nu_c0_sq * (1.0 - (1.0 - X ** 2) ** 3) / p.delta0
    return float(t) if np.ndim(t) == 0 else t


def regime_ratios(delta0: float, tau_q: float, eta: float) -> Dict[str, float]:
    """How well each regime inequality holds; > 1 means satisfied.

    overdamped: eta / sqrt(delta(0, t_hat)); underdamped: delta0 / (eta^3 tau_Q).
    """
    if eta == 0.0:
        return {OVERDAMPED: 0.0, UNDERDAMPED: math.inf}
    return {
        OVERDAMPED: eta / (eta * delta0 / tau_q) ** 0.25,
        UNDERDAMPED: delta0 / (eta ** 3 * tau_q),
    }


def classify_regime(delta0: float, tau_q: float, eta: float) -> str:
    ratios = regime_ratios(delta0, tau_q, eta)
    for regime in REGIMES:
        if ratios[regime] >= REGIME_MARGIN:
            return regime
    raise AmbiguousRegimeError(ratios)


def freeze_out(regime: str, delta0: float, tau_q: float, eta: float,
               a: float = 1.0, omega0: float = 1.0) -> FreezeOut:
    """Freeze-out time, correlation length and perturbation speed at the centre."""
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    ratios = regime_ratios(delta0, tau_q, eta)
    if ratios[regime] < REGIME_MARGIN:
        other = UNDERDAMPED if regime == OVERDAMPED else OVERDAMPED
        if ratios[regime] < 1.0 and ratios[other] < REGIME_MARGIN:
            raise AmbiguousRegimeError(ratios)
        warnings.warn(f"{regime} inequality holds only by a factor {ratios[regime]:.3g}",
                      IKZMValidityWarning, stacklevel=2)
    scale = a * omega0
    if regime == OVERDAMPED:
        return FreezeOut(
            regime=regime,
            t_hat=math.sqrt(eta * tau_q / delta0),
            xi_hat=scale * (eta * delta0 / tau_q) ** -0.25,
            # xi_hat / t_hat
            v_hat=scale * (delta0 / (eta ** 3 * tau_q)) ** 0.25,
        )
    return FreezeOut(
        regime=regime,
        t_hat=(tau_q / delta0) ** (1.0 / 3.0),
        xi_hat=scale * (tau_q / delta0) ** (1.0 / 3.0),
        v_hat=scale,
    )


def causality_prefactor(regime: str, p: IKZMInputs) -> float:
    """Prefactor of v_F / v_hat = prefactor / (|X| (1 - X^2)^2)."""
    base = p.L / (6.0 * p.nu_c0_sq * p.sound_scale * p.xi0)
    if regime == OVERDAMPED:
        return base * (p.eta * p.delta0 / p.tau_q) ** 0.75
    return base * p.delta0 / p.tau_q


def central_region(regime: str, p: IKZMInputs) -> float:
    """|X*|, half-width of the region where the homogeneous mechanism applies."""
    prefactor = causality_prefactor(regime, p)
    return prefactor if regime == OVERDAMPED else 0.5 * prefactor


def causality_ratio(X, regime: str, p: IKZMInputs):
    X = _check_X(X)
    with np.errstate(divide="ignore"):
        ratio = causality_prefactor(regime, p) / (np.abs(X) * (1.0 - X ** 2) ** 2)
    return float(ratio) if np.ndim(ratio) == 0 else ratio


@dataclass(frozen=True)
class DensityPrediction:
    regime: str
    geometry: str
    density: float
    x_star: Optional[float] = None
    X: Optional[np.ndarray] = None
    causality: Optional[np.ndarray] = None


def predicted_density(regime: str, geometry: str, p: IKZMInputs,
                      X: Optional[np.ndarray] = None) -> DensityPrediction:
    if regime not in REGIMES or geometry not in GEOMETRIES:
        raise ValueError(f"unknown regime/geometry {regime!r}/{geometry!r}")
    scale = p.sound_scale
    if geometry == HOMOGENEOUS:
        if regime == OVERDAMPED:
            density = (p.delta0 * p.eta / p.tau_q) ** 0.25 / scale
        else:
            density = (p.delta0 / p.tau_q) ** (1.0 / 3.0) / scale
        return DensityPrediction(regime=regime, geometry=geometry, density=density)

    prefactor = p.L / (3.0 * p.nu_c0_sq * scale ** 2)
    if regime == OVERDAMPED:
        density = prefactor * p.eta * p.delta0 / p.tau_q
    else:
        density = prefactor * (p.delta0 / p.tau_q) ** (4.0 / 3.0)
    x_star = central_region(regime, p)
    if x_star > X_STAR_LIMIT:
        warnings.warn(f"|X*| = {x_star:.3g} is not small; the trapped estimate is outside its range",
                      IKZMValidityWarning, stacklevel=2)
    X = np.linspace(0.01, 0.99, 99) if X is None else _check_X(X)
    return DensityPrediction(regime=regime, geometry=geometry, density=density, x_star=x_star,
                             X=X, causality=causality_ratio(X, regime, p))


def expected_exponent(regime: str, geometry: str) -> float:
    try:
        return EXPECTED_EXPONENTS[(regime, geometry)]
    except KeyError:
        raise ValueError(f"unknown regime/geometry {regime!r}/{geometry!r}") from None


def ikzm_report(profile: ChainProfile, delta0: float, tau_q: float, eta: float) -> Dict[str, float]:
    """Every closed-form quantity for one configuration, as a flat labeled mapping."""
    p = IKZMInputs.from_profile(profile, delta0, tau_q, eta)
    report: Dict[str, float] = {
        "n_ions": profile.n_ions,
        "L": profile.L,
        "a0": profile.a0,
        "omega0": profile.omega0,
        "nu_c0": math.sqrt(profile.nu_c0_sq),
        "nu_c0_finite_N": critical_frequency_finite_N(profile.n_ions) if profile.n_ions >= 3 else math.nan,
        "nu_c_thermodynamic": thermodynamic_critical_frequency(profile.a0),
        "delta0": delta0,
        "tau_Q": tau_q,
        "eta": eta,
    }
    ratios = regime_ratios(delta0, tau_q, eta)
    report["overdamped_ratio"] = ratios[OVERDAMPED]
    report["underdamped_ratio"] = ratios[UNDERDAMPED]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IKZMValidityWarning)
        for regime in REGIMES:
            try:
                fo = freeze_out(regime, delta0, tau_q, eta, a=profile.a0, omega0=profile.omega0)
            except AmbiguousRegimeError:
                fo = None
            for name in ("t_hat", "xi_hat", "v_hat"):
                report[f"{regime}_{name}"] = getattr(fo, name) if fo else math.nan
            for geometry in GEOMETRIES:
                prediction = predicted_density(regime, geometry, p)
                report[f"{regime}_{geometry}_density"] = prediction.density
                if prediction.x_star is not None:
                    report[f"{regime}_x_star"] = prediction.x_star
    for w in caught:
        logger.warning("%s", w.message)
    report["n_validity_warnings"] = len(caught)
    return report
