import logging
import math

import numpy as np
import pytest

from noncollocated.estimator import (BiasCanceller, FreqEstimator, ThetaSchedule,
                                     adaptive_theta)
from noncollocated.freq import compute_theta
from noncollocated.kernels import get_backend
from noncollocated.ssm import dominant_oscillatory_mode

DT = 2e-4
OM = 16.4
BETA = 1.5 * OM


def _estimate(signal, backend="python", omega_init=40.0, gamma=200.0, beta=BETA):
    return get_backend(backend).run_estimator(np.asarray(signal, float), DT, omega_init,
                                              gamma, 0.1, 0.0, beta)


def _sine(T, Y0=0.0, Y=1.0, phi=0.0, om=OM):
    t = np.arange(0.0, T, DT)
    return Y0 + Y * np.sin(om * t + phi)


def test_zero_input_freezes_estimate():
    est = FreqEstimator(40.0, 200.0)
    for _ in range(10_000):
        est.step(0.0, DT)
    assert est.omega == 40.0 and est.eta1 == 0.0 and est.eta2 == 0.0


def test_zero_gain_freezes_estimate():
    est = FreqEstimator(40.0, 0.0)
    for x in _sine(2.0):
        est.step(float(x), DT)
    assert est.omega == 40.0


def test_convergence_from_forty(backend):
    _, _, om = _estimate(_sine(10.0), backend, beta=0.0)
    assert om[-1] == pytest.approx(16.4, abs=0.3)


def _omega_before_after_removal(Y, gamma=200.0):
    sig = _sine(20.0, Y=Y)
    k = int(round(10.0 / DT))
    sig[k:] = 0.0
    b = "cython" if "cython" in _backends() else "python"
    _, _, om = _estimate(sig, b, gamma=gamma, beta=0.0)
    return om[k - 1], om[-1]


def test_signal_removal_freezes_estimate():
    before, after = _omega_before_after_removal(1.0)
    assert after == pytest.approx(before, rel=0.02)


def test_removal_drift_shrinks_with_amplitude():
    # the filter ring-down after removal still drives the adaptation; the
    # resulting drift scales with the signal amplitude
    drifts = [abs(np.subtract(*_omega_before_after_removal(Y))) for Y in (1e-2, 1e-3, 1e-4)]
    assert drifts[0] > drifts[1] > drifts[2]
    assert drifts[2] < 0.01


@pytest.mark.parametrize("Y0", [-1.0, 0.0, 5.0])
def test_bias_invariance(Y0):
    _, _, om = _estimate(_sine(20.0, Y0=Y0), "cython" if "cython" in _backends() else "python")
    assert om[-1] == pytest.approx(OM, rel=0.02)


def _backends():
    from noncollocated.kernels import available
    return available()


@pytest.mark.parametrize("phi", [0.0, math.pi / 3, math.pi])
@pytest.mark.parametrize("Y", [0.1, 1.0, 10.0])
def test_phase_amplitude_insensitivity(phi, Y):
    b = "cython" if "cython" in _backends() else "python"
    _, _, om = _estimate(_sine(40.0, Y=Y, phi=phi), b)
    assert om[-1] == pytest.approx(OM, rel=0.02)


def test_positivity_floor_million_steps():
    b = "cython" if "cython" in _backends() else "python"
    rng = np.random.default_rng(7)
    # bounded, violently varying input with a large gain and dt = 1 ms
    sig = rng.uniform(-5.0, 5.0, 1_000_000)
    _, _, om = get_backend(b).run_estimator(sig, 1e-3, 40.0, 5000.0, 0.1, 0.0, 0.0)
    assert np.all(om >= 0.1)
    assert np.all(np.isfinite(om))


def test_floor_engages_on_overshoot():
    est = FreqEstimator(1.0, 1e6, floor=0.1)
    est.eta1, est.eta2 = 1.0, 0.0
    est.step(5.0, 1e-3)
    assert est.omega >= 0.1


def test_estimator_validation():
    with pytest.raises(ValueError):
        FreqEstimator(0.0, 1.0)
    with pytest.raises(ValueError):
        FreqEstimator(1.0, 1.0, floor=0.0)


# ----------------------------------------------------------- bias canceller

def test_bias_canceller_constant():
    b = BiasCanceller(BETA, DT)
    out = [b.step(3.7) for _ in range(2000)]
    assert all(v == 0.0 for v in out)


def test_bias_canceller_harmonic():
    Y, phi = 0.7, 0.4
    b = BiasCanceller(BETA, DT)
    t = np.arange(0.0, 2.0, DT)
    y = 2.0 + Y * np.sin(OM * t + phi)
    w = np.array([b.step(float(v)) for v in y])
    want = Y * (np.sin(OM * t + phi) - np.sin(OM * t + phi - OM * math.pi / BETA))
    m = t > math.pi / BETA + 0.01
    np.testing.assert_allclose(w[m], want[m], atol=2e-5)


def test_bias_canceller_half_period_doubles():
    b = BiasCanceller(OM, DT)
    t = np.arange(0.0, 2.0, DT)
    w = np.array([b.step(float(v)) for v in np.sin(OM * t)])
    m = t > math.pi / OM + 0.01
    np.testing.assert_allclose(w[m], 2.0 * np.sin(OM * t[m]), atol=2e-5)


def test_beta_outside_interval_warns():
    with pytest.warns(UserWarning):
        BiasCanceller(4.0 * OM, DT, omega_nominal=OM)
    with pytest.warns(UserWarning):
        BiasCanceller(0.5 * OM, DT, omega_nominal=OM)


# --------------------------------------------------------------- theta

def test_adaptive_theta_nominal_matches_fixed(plant):
    om = dominant_oscillatory_mode(plant).omega
    assert adaptive_theta(plant, om) == compute_theta(plant, om)


def test_heuristic_theta(plant):
    assert adaptive_theta(plant, 16.4, "heuristic") == pytest.approx(0.1916, abs=1e-4)
    with pytest.raises(ValueError):
        adaptive_theta(plant, 16.4, "magic")
    with pytest.raises(ValueError):
        adaptive_theta(plant, -1.0)


def test_theta_sweep_continuity(plant, caplog):
    # theta may only jump at 2 pi phase wraps, and those are logged
    oms = np.linspace(8.0, 33.0, 2501)
    th = np.array([adaptive_theta(plant, w) for w in oms])
    assert np.all(th > 0)
    jumps = np.nonzero(np.abs(np.diff(th)) > 0.01)[0]
    for j in jumps:
        # a wrap changes theta by 2 pi / omega
        assert abs(abs(th[j + 1] - th[j]) - 2 * math.pi / oms[j]) < 0.05
    sched = ThetaSchedule(plant, oms[0], DT)
    with caplog.at_level(logging.DEBUG, logger="noncollocated.estimator"):
        for w in oms:
            sched.update(float(w))
    assert sched.wraps == len(jumps)
    assert len([r for r in caplog.records if "wrap" in r.getMessage()]) == len(jumps)


def test_theta_schedule_smoothing(plant):
    s = ThetaSchedule(plant, 16.346, DT, smoothing=0.05)
    th0 = s.theta
    target = adaptive_theta(plant, 18.0)
    for _ in range(int(0.05 / DT)):
        s.update(18.0)
    frac = (s.theta - th0) / (target - th0)
    assert frac == pytest.approx(1 - math.exp(-1), abs=0.01)
