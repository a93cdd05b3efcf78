"""Reference (pure-Python) implementation of the simulation loops.

Built from the public blocks; the compiled ``_kernel`` must reproduce it.
"""

from __future__ import annotations

import math

import numpy as np

from .control import DelayCompensator, Observer, PIController
from .estimator import BiasCanceller, FreqEstimator, ThetaSchedule
from .sim.plant import Contact, Limits, rk4_plant
from .ssm import LinearSSM

NAME = "python"

_REF, _IMPULSE, _CUTOFF, _RESTORE = range(4)


def simulate(p: dict):
    """Closed-loop run; returns ``(columns, bad_step, theta_wraps)``."""
    n = p["n_steps"]
    dt = p["dt"]
    A = p["A"].tolist()
    B = p["B"].tolist()
    D = p["Doff"].tolist()
    kappa, tau = p["kappa"], p["tau"]
    lim = Limits(p["z_min"], p["z_max"], p["u_min"], p["u_max"])
    contact = Contact("inelastic" if p["contact"] == 0 else "penalty", p["k_wall"], p["c_wall"])
    u_min, u_max = p["u_min"], p["u_max"]
    ctrl = p["ctrl"]
    adaptive = p["adaptive"]
    K = p["K"].tolist()
    noise = p["noise"]
    sys = LinearSSM(p["A"], p["B"], p["C"], p["Doff"])

    s = p["x0"].tolist() + [p["f0"]]
    r = p["r0"]
    cut = False

    pi = PIController(p["kp"], p["ki"], p["integ0"], p["aw_gain"])
    sched = est = bias = None
    if adaptive:
        est = FreqEstimator(p["omega_init"], p["gamma"], p["omega_floor"], p["deadzone"])
        bias = BiasCanceller(p["beta"], dt)
        sched = ThetaSchedule(sys, est.omega, dt, ("model", "heuristic")[p["theta_mode"]],
                              p["theta_smoothing"])
        theta = sched.theta
    else:
        theta = p["theta0"]
    comp = DelayCompensator(p["alpha"], theta, dt, max_theta=p["theta_max"])
    obs = Observer(sys, K, p["Q"], p["xhat0"]) if ctrl == 2 else None
    obs_textbook = p["obs_input"] == 1

    ev_step, ev_kind, ev_value = p["ev_step"], p["ev_kind"], p["ev_value"]
    n_ev = len(ev_step)
    ie = 0

    cols = {k: np.zeros(n) for k in (
        "t", "r", "y", "y_meas", "u_raw", "u_sat", "sat_flag", "z", "zdot", "ydot", "f_act",
        "omega_t", "theta", "xhat1", "xhat2", "xhat3", "xhat4")}
    omega = p["omega_init"] if adaptive else float("nan")
    excess = 0.0
    bad = -1

    for k in range(n):
        while ie < n_ev and ev_step[ie] <= k:
            kind = ev_kind[ie]
            if kind == _REF:
                r = ev_value[ie]
            elif kind == _IMPULSE:
                s[2] += ev_value[ie]
            elif kind == _CUTOFF:
                cut = True
            else:
                cut = False
            ie += 1

        y = s[3]
        ym = y + noise[k]

        if ctrl == 0:
            u_raw = p["u_hold"]
        elif ctrl == 1:
            if adaptive:
                w = bias.step(ym)
                _, omega = est.step(w, dt)
                theta = sched.update(omega)
                comp.theta = theta
            u_raw = pi.step(r - ym, dt, excess) + comp.step(ym) + p["u_g"]
        elif ctrl == 2:
            xh = obs.xhat
            u_raw = p["u_g"] + (r - (K[0] * xh[0] + K[1] * xh[1] + K[2] * xh[2]
                                     + K[3] * xh[3])) / kappa
        else:
            xm = (s[0], s[1], s[2], ym)
            u_raw = p["u_g"] + (r - (K[0] * xm[0] + K[1] * xm[1] + K[2] * xm[2]
                                     + K[3] * xm[3])) / kappa

        if cut:
            u = 0.0
            sat = 0.0
        elif u_raw < u_min:
            u, sat = u_min, 1.0
        elif u_raw > u_max:
            u, sat = u_max, 1.0
        else:
            u, sat = u_raw, 0.0
        excess = u - u_raw

        cols["t"][k] = k * dt
        cols["r"][k] = r
        cols["y"][k] = y
        cols["y_meas"][k] = ym
        cols["u_raw"][k] = u_raw
        cols["u_sat"][k] = u
        cols["sat_flag"][k] = sat
        cols["zdot"][k] = s[0]
        cols["z"][k] = s[1]
        cols["ydot"][k] = s[2]
        cols["f_act"][k] = s[4]
        cols["omega_t"][k] = omega
        cols["theta"][k] = comp.theta
        if obs is not None:
            cols["xhat1"][k], cols["xhat2"][k], cols["xhat3"][k], cols["xhat4"][k] = obs.xhat

        f_start = s[4]
        s = rk4_plant(s, A, B, D, kappa, tau, u, dt, lim, contact)
        if obs is not None:
            obs.step(f_start if obs_textbook else kappa * u, ym, dt)
        if not all(math.isfinite(v) for v in s) or (
                obs is not None and not np.all(np.isfinite(obs.xhat))):
            bad = k
            break

    return cols, bad, (sched.wraps if sched is not None else 0)


def run_estimator(signal: np.ndarray, dt: float, omega_init: float, gamma: float,
                  floor: float, deadzone: float, beta: float):
    """Bias canceller (skipped when ``beta <= 0``) feeding the estimator.

    Returns arrays ``(w, nu, omega)``, one entry per input sample.
    """
    est = FreqEstimator(omega_init, gamma, floor, deadzone)
    bias = BiasCanceller(beta, dt) if beta > 0 else None
    n = len(signal)
    w_out = np.empty(n)
    nu_out = np.empty(n)
    om_out = np.empty(n)
    for k in range(n):
        w = bias.step(signal[k]) if bias is not None else signal[k]
        nu, om = est.step(w, dt)
        w_out[k] = w
        nu_out[k] = nu
        om_out[k] = om
    return w_out, nu_out, om_out
