"""Frequency-domain report for a plant: loop shapes, margins and reshaping.

Loop conventions:

* state-feedback loops ``L_m``, ``L_o`` are in newtons, so the actuator
  enters them as the unit-gain lag ``1 / (tau s + 1)`` (``kappa`` is undone by
  the volt conversion of the control law);
* the PI loop ``PI(s) kappa F(s) G(s)`` runs from volts to metres;
* the delay reshaping is evaluated on ``kappa G(s)`` (voltage input, lag
  neglected).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .design import (PAPER_CONTROLLER_POLES, PAPER_OBSERVER_POLES, place_observer,
                     place_state_feedback)
from .freq import (FreqGrid, FreqResponse, MarginReport, compute_theta, default_grid,
                   eval_actuator, eval_tf, margins, open_loop_measured, open_loop_observer,
                   reshape_ratio, sensitivity_peak)
from .ssm import ActuatorLag, LinearSSM, ModeInfo, dominant_oscillatory_mode, paper_actuator

LOOP_NAMES = ("Lm", "FLm", "Lo", "FLo")


def pi_response(kp: float, ki: float, omega):
    w = np.asarray(omega, dtype=float)
    return kp + ki / (1j * w)


def state_feedback_loops(sys: LinearSSM, K, Q, act: ActuatorLag) -> dict:
    """The four open loops of the pole-placement design, keyed by :data:`LOOP_NAMES`."""
    lag = ActuatorLag(kappa=1.0, tau=act.tau)
    Lm = open_loop_measured(sys, K)
    Lo = open_loop_observer(sys, K, Q)
    return {
        "Lm": Lm,
        "FLm": lambda w: eval_actuator(lag, w) * Lm(w),
        "Lo": Lo,
        "FLo": lambda w: eval_actuator(lag, w) * Lo(w),
    }


def pi_loop(sys: LinearSSM, act: ActuatorLag, kp: float = 100.0, ki: float = 170.0):
    return lambda w: pi_response(kp, ki, w) * eval_actuator(act, w) * eval_tf(sys, w)


def reshape_plant(act: ActuatorLag) -> ActuatorLag:
    """Static actuator gain used for the reshaping analysis."""
    return ActuatorLag(kappa=act.kappa, tau=0.0)


@dataclass
class AnalysisReport:
    mode: ModeInfo
    theta: float
    alpha: float
    K: np.ndarray
    Q: np.ndarray
    sensitivity: dict[str, MarginReport]
    pi_margins: MarginReport
    responses: dict[str, FreqResponse] = field(default_factory=dict)

    def margins_text(self) -> str:
        m = self.pi_margins
        lines = [
            f"omega0_rad_s = {self.mode.omega0!r}",
            f"delta = {self.mode.delta!r}",
            f"omega_damped_rad_s = {self.mode.omega!r}",
            f"theta_s = {self.theta!r}",
        ]
        for name in LOOP_NAMES:
            s = self.sensitivity[name]
            lines.append(f"S_max_{name}_dB = {s.s_max_db!r}  # at {s.s_max_freq:.6g} rad/s")
        lines += [
            f"PI_gain_margin_dB = {m.gain_margin_db!r}",
            f"PI_phase_crossover_rad_s = {m.phase_crossover!r}",
            f"PI_phase_margin_deg = {m.phase_margin_deg!r}",
            f"PI_gain_crossover_rad_s = {m.gain_crossover!r}",
            f"PI_closed_loop_unstable = {m.closed_loop_unstable}",
        ]
        return "\n".join(lines) + "\n"


def analyze(sys: LinearSSM, act: ActuatorLag | None = None, grid: FreqGrid | None = None,
            alpha: float = 100.0, kp: float = 100.0, ki: float = 170.0,
            controller_poles=PAPER_CONTROLLER_POLES,
            observer_poles=PAPER_OBSERVER_POLES) -> AnalysisReport:
    """Everything behind the sensitivity and reshaping plots for ``sys``."""
    act = act or paper_actuator()
    grid = grid or default_grid()
    w = grid.omegas
    mode = dominant_oscillatory_mode(sys)
    theta = compute_theta(sys, mode.omega)
    K = place_state_feedback(sys, controller_poles)
    Q = place_observer(sys, observer_poles)

    loops = state_feedback_loops(sys, K, Q, act)
    sens = {name: sensitivity_peak(L, grid) for name, L in loops.items()}
    L_pi = pi_loop(sys, act, kp, ki)
    pim = margins(L_pi, grid)

    responses = {"bode_G": FreqResponse(grid, eval_tf(sys, w))}
    for name, L in loops.items():
        responses[f"sensitivity_{name}"] = FreqResponse(grid, 1.0 / (1.0 + L(w)))
    ratio = reshape_ratio(sys, alpha, theta, w, reshape_plant(act))
    responses["reshape_R"] = FreqResponse(grid, 1.0 / ratio)
    return AnalysisReport(mode, theta, alpha, K, Q, sens, pim, responses)


@dataclass(frozen=True)
class ReshapeMetrics:
    """Magnitude of ``G_cl / G`` in three bands (all dB)."""

    alpha: float
    theta: float
    low_band_db: float        # mean over 0.5..3 rad/s
    resonance_reduction_db: float  # peak |G| minus peak |G_cl| around the mode
    at_mode_db: float         # |G_cl / G| at the damped frequency
    high_band_dev_db: float   # largest |deviation| from 0 dB for >= 10x the mode

    def text(self) -> str:
        return "\n".join(f"{k} = {v!r}" for k, v in self.__dict__.items()) + "\n"


def reshape_metrics(sys: LinearSSM, act: ActuatorLag | None = None, alpha: float = 100.0,
                    theta: float | None = None) -> ReshapeMetrics:
    act = reshape_plant(act or paper_actuator())
    om = dominant_oscillatory_mode(sys).omega
    if theta is None:
        theta = compute_theta(sys, om)

    def gain(w):
        return act.kappa * eval_tf(sys, w)

    def ratio_db(w):
        return -20.0 * np.log10(np.abs(reshape_ratio(sys, alpha, theta, w, act)))

    low = np.logspace(np.log10(0.5), np.log10(3.0), 200)
    band = np.linspace(0.5 * om, 2.0 * om, 4001)
    g = np.abs(gain(band))
    g_cl = g / np.abs(reshape_ratio(sys, alpha, theta, band, act))
    high = np.logspace(np.log10(10.0 * om), 4.0, 400)
    return ReshapeMetrics(
        alpha=float(alpha),
        theta=float(theta),
        low_band_db=float(np.mean(ratio_db(low))),
        resonance_reduction_db=float(20.0 * np.log10(g.max() / g_cl.max())),
        at_mode_db=float(ratio_db(om)),
        high_band_dev_db=float(np.max(np.abs(ratio_db(high)))),
    )
