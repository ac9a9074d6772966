import math
import warnings

import numpy as np
import pytest

from errors import AmbiguousRegimeError, DivergentFrontError, DomainError, IKZMValidityWarning
from predictors import (HOMOGENEOUS, OVERDAMPED, TRAPPED, UNDERDAMPED, IKZMInputs, causality_ratio,
                        central_region, classify_regime, expected_exponent, freeze_out, front_time,
                        front_velocity, ikzm_report, predicted_density, regime_ratios)


def _inputs(**overrides):
    values = dict(delta0=1.0, tau_q=100.0, eta=1.0)
    values.update(overrides)
    return IKZMInputs(**values)


def test_front_velocity_values():
    p = _inputs(tau_q=1.0)
    assert front_velocity(0.5, p) == pytest.approx(1.0 / 6.0 / (0.5 * 0.75 ** 2))
    assert front_velocity(-0.5, p) == pytest.approx(front_velocity(0.5, p))
    with pytest.raises(DivergentFrontError):
        front_velocity(0.0, p)
    with pytest.raises(DomainError):
        front_velocity(1.0, p)


def test_front_velocity_is_slope_of_front_time():
    p = IKZMInputs(delta0=2.0, tau_q=30.0, eta=1.0, L=7.0, nu_c0_sq=340.0)
    X = np.array([0.1, 0.3, 0.6, 0.8])
    h = 1e-6
    dt_dx = (front_time(X + h, p) - front_time(X - h, p)) / (2.0 * h * p.L)
    assert np.allclose(1.0 / dt_dx, front_velocity(X, p), rtol=1e-6)
    assert front_time(0.0, p) == 0.0


def test_regime_ratios():
    ratios = regime_ratios(1.0, 16.0, 1.0)
    assert ratios[OVERDAMPED] == pytest.approx(2.0)
    assert ratios[UNDERDAMPED] == pytest.approx(1.0 / 16.0)
    assert regime_ratios(1.0, 1.0, 0.0)[UNDERDAMPED] == math.inf


def test_classify_regime():
    assert classify_regime(1.0, 100.0, 100.0) == OVERDAMPED
    assert classify_regime(1.0, 10.0, 0.01) == UNDERDAMPED
    assert classify_regime(1.0, 10.0, 0.0) == UNDERDAMPED
    with pytest.raises(AmbiguousRegimeError) as info:
        classify_regime(1.0, 16.0, 1.0)
    assert info.value.diagnostics[OVERDAMPED] == pytest.approx(2.0)


def test_overdamped_freeze_out():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fo = freeze_out(OVERDAMPED, delta0=1.0, tau_q=100.0, eta=100.0)
    assert fo.t_hat == pytest.approx(100.0)
    assert fo.xi_hat == pytest.approx(1.0)
    assert fo.v_hat == pytest.approx(0.01)
    assert fo.v_hat == pytest.approx(fo.xi_hat / fo.t_hat)


def test_underdamped_freeze_out():
    fo = freeze_out(UNDERDAMPED, delta0=8.0, tau_q=1.0, eta=0.01, a=0.5, omega0=2.0 ** 1.5)
    assert fo.t_hat == pytest.approx(0.5)
    assert fo.xi_hat == pytest.approx(0.5 * 0.5 * 2.0 ** 1.5)
    assert fo.v_hat == pytest.approx(0.5 * 2.0 ** 1.5)


def test_freeze_out_near_the_regime_boundary():
    with pytest.warns(IKZMValidityWarning):
        freeze_out(OVERDAMPED, delta0=1.0, tau_q=16.0, eta=1.0)
    with pytest.raises(AmbiguousRegimeError):
        freeze_out(OVERDAMPED, delta0=1.0, tau_q=0.6561, eta=1.0)
    with pytest.warns(IKZMValidityWarning):
        freeze_out(UNDERDAMPED, delta0=1.0, tau_q=0.6561, eta=1.0)
    with pytest.raises(ValueError):
        freeze_out("critical", delta0=1.0, tau_q=1.0, eta=1.0)


@pytest.mark.parametrize("regime, geometry", [(OVERDAMPED, HOMOGENEOUS), (UNDERDAMPED, HOMOGENEOUS),
                                              (OVERDAMPED, TRAPPED), (UNDERDAMPED, TRAPPED)])
def test_density_scales_with_expected_exponent(regime, geometry):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IKZMValidityWarning)
        slow = predicted_density(regime, geometry, _inputs(tau_q=1600.0)).density
        fast = predicted_density(regime, geometry, _inputs(tau_q=100.0)).density
    assert math.log(fast / slow) / math.log(16.0) == pytest.approx(expected_exponent(regime, geometry))


def test_trapped_density_values():
    p = _inputs(L=3.0, nu_c0_sq=2.0)
    over = predicted_density(OVERDAMPED, TRAPPED, p)
    assert over.density == pytest.approx(3.0 / (3.0 * 2.0) * 1.0 / 100.0)
    under = predicted_density(UNDERDAMPED, TRAPPED, p)
    assert under.density == pytest.approx(0.5 * 0.01 ** (4.0 / 3.0))
    assert under.x_star == pytest.approx(0.5 * 3.0 / 12.0 * 0.01)


def test_central_region_marks_causality_boundary():
    p = _inputs()
    x_star = central_region(OVERDAMPED, p)
    assert x_star == pytest.approx(0.01 ** 0.75 / 6.0)
    assert causality_ratio(x_star, OVERDAMPED, p) == pytest.approx(1.0, rel=1e-3)
    prediction = predicted_density(OVERDAMPED, TRAPPED, p)
    outside = (prediction.X > x_star) & (prediction.X <= 0.5)
    assert np.all(prediction.causality[outside] < 1.0)


def test_large_central_region_warns():
    with pytest.warns(IKZMValidityWarning):
        prediction = predicted_density(OVERDAMPED, TRAPPED, _inputs(tau_q=0.01))
    assert prediction.x_star > 0.3


def test_unknown_labels():
    with pytest.raises(ValueError):
        expected_exponent("critical", TRAPPED)
    with pytest.raises(ValueError):
        predicted_density(OVERDAMPED, "ring", _inputs())
    with pytest.raises(DomainError):
        IKZMInputs(delta0=0.0, tau_q=1.0, eta=1.0)


def test_report_for_fifty_ions(chain50):
    report = ikzm_report(chain50, delta0=0.1 * chain50.nu_c0_sq, tau_q=100.0, eta=100.0)
    assert report["n_ions"] == 50
    assert report["a0"] == pytest.approx(chain50.a0)
    assert report["overdamped_ratio"] > 3.0
    assert math.isfinite(report["overdamped_t_hat"])
    assert report["overdamped_trapped_density"] > 0.0
    assert report["nu_c0_finite_N"] == pytest.approx(150.0 / (4.0 * math.sqrt(math.log(50))))
    assert report["n_validity_warnings"] >= 1


def test_report_marks_ambiguous_regime_as_nan(chain50):
    report = ikzm_report(chain50, delta0=1.0, tau_q=0.6561, eta=1.0)
    assert math.isnan(report["overdamped_t_hat"])
    assert math.isfinite(report["underdamped_t_hat"])
