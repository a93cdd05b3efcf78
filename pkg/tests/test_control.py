import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from noncollocated.control import (GRAVITY_FEEDFORWARD_V, DelayCompensator, DelayLine, Observer,
                                   PIController, combined_law, saturate, state_feedback)
from noncollocated.design import (PAPER_CONTROLLER_POLES, PAPER_OBSERVER_POLES, place_observer,
                                  place_state_feedback)
from noncollocated.freq import delay_control_response
from noncollocated.ssm import equilibrium

from oracles import harmonic_fit

DT = 2e-4


# ------------------------------------------------------------------ PI

def test_pi_zero_error_gives_zero():
    pi = PIController(100.0, 170.0)
    assert all(pi.step(0.0, DT) == 0.0 for _ in range(100))


def test_pi_pure_proportional():
    assert PIController(1.0, 0.0).step(0.5, 0.1) == 0.5


def test_pi_unit_ramp_integral():
    pi = PIController(0.0, 1.0)
    for _ in range(10):
        out = pi.step(1.0, 0.1)
    assert out == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0).filter(lambda v: v == 0.0 or abs(v) > 1e-100),
                min_size=1, max_size=50))
def test_pi_is_linear(errs):
    # doubling is exact in binary floating point as long as nothing underflows
    a, b = PIController(100.0, 170.0), PIController(100.0, 170.0)
    for e in errs:
        ua = a.step(e, DT)
        ub = b.step(2.0 * e, DT)
    assert ub == 2.0 * ua


def test_pi_rectangle_rule_integral():
    pi = PIController(0.0, 1.0)
    errs = np.linspace(-1, 2, 37)
    for e in errs:
        pi.step(float(e), 0.01)
    assert pi.integ == pytest.approx(float(np.sum(errs) * 0.01), abs=1e-14)


def test_pi_anti_windup_bleeds_integrator():
    plain, aw = PIController(0.0, 10.0), PIController(0.0, 10.0, aw_gain=5.0)
    for _ in range(100):
        plain.step(1.0, 0.01)
        aw.step(1.0, 0.01, excess=-1.0)
    assert aw.integ < plain.integ


# ------------------------------------------------------------- saturation

@pytest.mark.parametrize("u, out, flag", [(5.0, 5.0, False), (-2.0, 0.0, True), (12.0, 10.0, True)])
def test_saturate_examples(u, out, flag):
    assert saturate(u, 0.0, 10.0) == (out, flag)


def test_saturate_rejects_empty_interval():
    with pytest.raises(ValueError):
        saturate(1.0, 5.0, 5.0)


# ------------------------------------------------------------ delay line

def test_delay_line_padding_returns_oldest():
    d = DelayLine.for_delay(0.1, 1.0)
    d.push(3.0)
    d.push(4.0)
    assert d.lookup(0.0) == 4.0
    assert d.lookup(0.05) == pytest.approx(3.5)
    assert d.lookup(0.9) == 3.0


def test_delay_line_interpolates():
    d = DelayLine.for_delay(0.1, 1.0)
    for k in range(20):
        d.push(float(k))
    assert d.lookup(0.35) == pytest.approx(19 - 3.5)


def test_delay_line_span_errors():
    d = DelayLine.for_delay(0.1, 0.5)
    d.push(1.0)
    with pytest.raises(ValueError):
        d.lookup(0.7)
    with pytest.raises(ValueError):
        d.lookup(-0.1)
    with pytest.raises(LookupError):
        DelayLine(0.1, 4).lookup(0.0)


# ------------------------------------------------------- delay compensator

@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 500.0), st.floats(0.0, 0.4), st.floats(-1.0, 1.0))
def test_compensator_zero_for_constant(alpha, theta, y):
    c = DelayCompensator(alpha, theta, DT)
    assert all(c.step(y) == 0.0 for _ in range(50))


def test_compensator_alpha_zero():
    c = DelayCompensator(0.0, 0.19, DT)
    assert all(c.step(math.sin(0.01 * k)) == 0.0 for k in range(3000))


def test_compensator_half_period_doubles():
    om = 16.0
    theta = math.pi / om
    c = DelayCompensator(1.0, theta, DT)
    t = np.arange(0, 2.0, DT)
    out = np.array([c.step(math.sin(om * tk)) for tk in t])
    m = t > theta + 0.01
    np.testing.assert_allclose(out[m], 2.0 * np.sin(om * t[m]), atol=2e-5)


@pytest.mark.parametrize("om", [2.0, 8.0, 16.346, 40.0, 120.0])
def test_compensator_time_matches_frequency(om):
    alpha, theta = 100.0, 0.19420646375403208
    c = DelayCompensator(alpha, theta, DT)
    t = np.arange(0, theta + 12 * math.pi / om + 0.5, DT)
    out = np.array([c.step(math.sin(om * tk)) for tk in t])
    m = t > theta + 0.01
    got = harmonic_fit(t[m], out[m], om)
    want = delay_control_response(alpha, theta, om)
    assert abs(got) == pytest.approx(abs(want), rel=0.01)
    dphi = math.degrees(abs(np.angle(got / want)))
    assert dphi < 1.0


def test_compensator_rejects_negative_theta():
    with pytest.raises(ValueError):
        DelayCompensator(1.0, -0.1, DT)


# -------------------------------------------------------------- combined law

def test_combined_law_feedforward():
    pi = PIController(100.0, 170.0)
    c = DelayCompensator(0.0, 0.19, DT)
    assert combined_law(pi, c, 0.01, 0.01, DT) == GRAVITY_FEEDFORWARD_V == 4.035


def test_combined_law_constant_tracking_is_exact():
    pi = PIController(100.0, 170.0)
    c = DelayCompensator(100.0, 0.19, DT)
    assert all(combined_law(pi, c, 0.02, 0.02, DT) == 4.035 for _ in range(500))


def test_gravity_feedforward_consistency(plant, act):
    from noncollocated import paper_physical_params
    p = paper_physical_params()
    u = (p.m + p.M) * 9.806 / act.kappa
    assert u == pytest.approx(4.034, abs=1e-3)
    assert u == pytest.approx(GRAVITY_FEEDFORWARD_V, rel=1e-3)


# ---------------------------------------------------------- state feedback

def test_state_feedback_examples():
    assert state_feedback(np.zeros(4), np.ones(4), 0.3, 4.035) == pytest.approx(4.335)
    assert state_feedback(np.ones(4), np.zeros(4), 0.3, 4.035) == pytest.approx(4.335)
    assert state_feedback([1.0, 2.0], [1.0, 1.0], 5.0, 0.0, gain=2.0) == 1.0


def test_state_feedback_dc_offset(plant):
    # noiseless nominal loop x' = (A - BK) x + B r + Doff settles to a
    # constant without a unity-gain pre-filter
    K = place_state_feedback(plant, PAPER_CONTROLLER_POLES)
    Acl = plant.A - np.outer(plant.B, K)
    r = 50.0
    x_ss = -np.linalg.solve(Acl, plant.B * r + plant.Doff)
    M = np.zeros((5, 5))
    M[:4, :4] = Acl
    M[:4, 4] = plant.B * r + plant.Doff
    x = np.zeros(5)
    x[4] = 1.0
    x = scipy.linalg.expm(M * 2.0) @ x
    assert x[3] == pytest.approx(x_ss[3], rel=1e-6)
    dc = float(-plant.C @ np.linalg.solve(Acl, plant.B))
    assert dc != pytest.approx(1.0, rel=0.01)


# ---------------------------------------------------------------- observer

@pytest.fixture
def gains(plant):
    return (place_state_feedback(plant, PAPER_CONTROLLER_POLES),
            place_observer(plant, PAPER_OBSERVER_POLES))


def test_observer_zero_error_at_rest_stays_zero(plant, gains):
    x0, f0 = equilibrium(plant, 0.0105)
    ob = Observer(plant, *gains, xhat0=x0)
    y = float(plant.C @ x0)
    for _ in range(100_000):
        ob.step(f0, y, DT)
    assert np.max(np.abs(ob.xhat - x0)) < 1e-9


def _zoh(plant, dt):
    M = np.zeros((6, 6))
    M[:4, :4] = plant.A
    M[:4, 4] = plant.B
    M[:4, 5] = plant.Doff
    return scipy.linalg.expm(M * dt)


def _track(plant, gains, dt, t_end):
    E = _zoh(plant, dt)
    x0, f0 = equilibrium(plant, 0.0105)
    x = x0.copy()
    x[3] += 0.002
    ob = Observer(plant, *gains, xhat0=x)
    errs = []
    for k in range(int(round(t_end / dt))):
        f = f0 + 5.0 * math.sin(3.0 * k * dt)
        ob.step(f, float(plant.C @ x), dt)
        x = (E @ np.r_[x, f, 1.0])[:4]
        errs.append(abs(ob.xhat[3] - x[3]))
    return np.array(errs)


def test_observer_moving_plant_error_is_sample_hold_only(plant, gains):
    # the measurement is held over each step, so a zero initial error picks
    # up an O(dt) hold error; it must stay bounded and shrink with dt
    e1 = _track(plant, gains, 4e-4, 2.0)
    e2 = _track(plant, gains, 2e-4, 2.0)
    assert e2.max() < 0.6 * e1.max()
    assert e2[len(e2) // 2:].max() <= e2.max()
    assert e2.max() < 1e-5


def test_observer_error_decay(plant, gains):
    x0, f0 = equilibrium(plant, 0.0105)
    xh0 = x0 + np.array([0.01, 0.001, -0.01, 0.001])
    ob = Observer(plant, *gains, xhat0=xh0)
    y = float(plant.C @ x0)
    e0 = np.linalg.norm(xh0 - x0)
    for _ in range(int(round(0.05 / DT))):
        ob.step(f0, y, DT)
    assert np.linalg.norm(ob.xhat - x0) < 1e-6 * e0


def test_observer_error_matches_exact_decay(plant, gains):
    x0, f0 = equilibrium(plant, 0.0105)
    e0 = np.array([0.01, 0.001, -0.01, 0.001])
    ob = Observer(plant, *gains, xhat0=x0 + e0)
    y = float(plant.C @ x0)
    for _ in range(int(round(0.05 / DT))):
        ob.step(f0, y, DT)
    Ao = plant.A - np.outer(gains[1], plant.C)
    exact = scipy.linalg.expm(Ao * 0.05) @ e0
    np.testing.assert_allclose(ob.xhat - x0, exact, rtol=1e-3, atol=1e-12)


def test_observer_open_loop_copy(plant):
    x0 = np.array([0.01, 0.002, -0.03, 0.004])
    ob = Observer(plant, np.zeros(4), np.zeros(4), xhat0=x0)
    E = _zoh(plant, DT)
    x = x0.copy()
    for k in range(2000):
        ob.step(3.0, 123.0, DT)  # y is ignored when Q = 0
        x = (E @ np.r_[x, 3.0, 1.0])[:4]
    np.testing.assert_allclose(ob.xhat, x, rtol=1e-8, atol=1e-10)
