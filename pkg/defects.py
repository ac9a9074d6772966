"""Kink/antikink detection, the central counting window and the stopping rule."""

import logging
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config import SIGN_FLOOR_FRACTION, STOP_FRACTION
from coulomb import IonState
from equilibrium import ChainProfile, relax_zigzag
from errors import ConfigError, DomainError, IndeterminateCensusError, IKZMValidityWarning, WindowError
from utils import charges_to_string

logger = logging.getLogger(__name__)

# Relaxed references below this fraction of the central spacing are a linear chain.
LINEAR_REFERENCE_FRACTION = 1e-3


@dataclass(frozen=True)
class DefectCensus:
    window: range
    defects: Tuple[Tuple[int, int], ...] = ()
    density: float = 0.0

    @property
    def n_defects(self) -> int:
        return len(self.defects)

    @property
    def charges(self) -> List[int]:
        return [sigma for _, sigma in self.defects]

    def to_row(self, realization_id: int, tau_q: float, eta: float) -> dict:
        return {
            "realization_id": realization_id,
            "tau_Q": tau_q,
            "eta": eta,
            "n_defects": self.n_defects,
            "density": self.density,
            "charges": charges_to_string(self.charges),
        }


@dataclass(frozen=True)
class StopRule:
    """Fires once t >= min_time and <|y|> over the window reaches target_fraction * reference."""
    reference: float
    min_time: float
    window: Optional[range] = None
    target_fraction: float = STOP_FRACTION

    def __post_init__(self):
        if not 0.0 < self.target_fraction < 1.0:
            raise ConfigError("target_fraction must lie in (0, 1)")
        if self.reference < 0.0:
            raise ConfigError("reference amplitude must be non-negative")


def centermost_indices(n_ions: int, n_central: int) -> range:
    start = (n_ions - n_central) // 2
    return range(start, start + n_central)


def eligible_count(profile: ChainProfile, nu_t_sq_final: float) -> int:
    """Ions whose local critical frequency lies above the final trap frequency."""
    X2 = np.clip((profile.positions / profile.L) ** 2, 0.0, 1.0)
    return int(np.count_nonzero(profile.nu_c0_sq * (1.0 - X2) ** 3 > nu_t_sq_final))


def central_window(profile: ChainProfile, nu_t_sq_final: float, n_central: int) -> range:
    """The n_central centermost ions, clipped to those that would turn zigzag adiabatically."""
    if nu_t_sq_final >= profile.nu_c0_sq:
        raise WindowError(
            f"final nu_t^2 = {nu_t_sq_final:.6g} does not cross nu_c0^2 = {profile.nu_c0_sq:.6g}")
    if n_central < 2:
        raise WindowError("the counting window needs at least two ions")
    eligible = eligible_count(profile, nu_t_sq_final)
    if eligible < 2:
        raise WindowError(f"only {eligible} ion(s) reach the zigzag phase; quench too shallow")
    if n_central > eligible:
        warnings.warn(f"window clipped from {n_central} to {eligible} ions that cross criticality",
                      IKZMValidityWarning, stacklevel=2)
        n_central = eligible
    return centermost_indices(profile.n_ions, n_central)


def _window_y(state: IonState, window: Sequence[int]) -> np.ndarray:
    return np.asarray(state.y)[list(window)]


def mean_abs_transverse(state: IonState, window: Sequence[int]) -> float:
    return float(np.mean(np.abs(_window_y(state, window))))


def signs_with_floor(values, floor: float) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return np.where(np.abs(values) >= floor, np.sign(values), 0.0).astype(int)


def staggered_signs(state: IonState, window: Sequence[int], floor: Optional[float] = None) -> np.ndarray:
    """s_i = (-1)^i sign(y_i) where |y_i| >= floor, else 0; i is the chain index."""
    y = _window_y(state, window)
    if floor is None:
        floor = SIGN_FLOOR_FRACTION * float(np.mean(np.abs(y)))
        if floor == 0.0:
            return np.zeros(y.size, dtype=int)
    elif floor <= 0.0:
        raise DomainError("sign floor must be positive")
    stagger = np.where(np.asarray(window) % 2 == 0, 1, -1)
    return stagger * signs_with_floor(y, floor)


def sign_changes(signs, periodic: bool = False) -> List[Tuple[int, int, int]]:
    """Changes between consecutive nonzero signs, zeros bridged.

    Returns (left index, right index, charge) with charge +1 for a - to + change.
    On a periodic sequence the wrap-around pair is included.
    """
    signs = np.asarray(signs)
    nz = np.flatnonzero(signs)
    pairs = list(zip(nz[:-1], nz[1:]))
    if periodic and nz.size >= 2:
        pairs.append((nz[-1], nz[0]))
    return [(int(p), int(q), 1 if signs[q] > 0 else -1) for p, q in pairs if signs[p] != signs[q]]


def count_defects(state: IonState, window: Sequence[int], floor: Optional[float] = None) -> DefectCensus:
    window = window if isinstance(window, range) else range(window[0], window[-1] + 1)
    signs = staggered_signs(state, window, floor)
    if np.count_nonzero(signs) < 2:
        raise IndeterminateCensusError("fewer than two ions above the sign floor in the window")
    defects = tuple(
        (window.start + (p + q - 1) // 2, sigma) for p, q, sigma in sign_changes(signs)
    )
    return DefectCensus(window=window, defects=defects, density=len(defects) / len(window))


def should_stop(state: IonState, rule: StopRule, window: Optional[Sequence[int]] = None) -> bool:
    if state.t < rule.min_time:
        return False
    window = rule.window if window is None else window
    if window is None:
        raise ConfigError("stop rule has no window")
    return mean_abs_transverse(state, window) >= rule.target_fraction * rule.reference


def zigzag_reference(profile: ChainProfile, nu_t_sq_final: float, window: Sequence[int]) -> float:
    """<|y|> over the window of the noise-free zigzag in the final trap; 0 for a linear chain."""
    relaxed = relax_zigzag(profile, nu_t_sq_final)
    reference = mean_abs_transverse(relaxed, window)
    if reference < LINEAR_REFERENCE_FRACTION * profile.a0:
        return 0.0
    logger.debug("zigzag reference <|y|> = %.6g at nu_t^2 = %.6g", reference, nu_t_sq_final)
    return reference


def take_census(state: IonState, rule: StopRule, window: Sequence[int],
                floor: Optional[float] = None) -> DefectCensus:
    """Census at the stopping point; a quench that never reaches a zigzag carries no defects."""
    window = window if isinstance(window, range) else range(window[0], window[-1] + 1)
    if rule.reference == 0.0:
        return DefectCensus(window=window)
    return count_defects(state, window, floor)
