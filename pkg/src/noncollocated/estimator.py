"""Online oscillation-frequency estimation for adaptive delay tuning.

The estimator is a second-order band-pass filter whose centre frequency is
adapted until the filter output matches its input; a bias-canceling delay
difference in front of it strips constant offsets from the measured signal.
"""

from __future__ import annotations

import logging
import math
import warnings

from .control import DelayLine
from .freq import compute_theta
from .ssm import LinearSSM

log = logging.getLogger(__name__)

DEFAULT_OMEGA_FLOOR = 0.1


def _sign(v: float, deadzone: float) -> float:
    if v > deadzone:
        return 1.0
    if v < -deadzone:
        return -1.0
    return 0.0


class FreqEstimator:
    """Adaptive band-pass frequency estimator.

    Filter ``eta1' = eta2``, ``eta2' = -om^2 eta1 - 2 om eta2 + 2 om w`` with
    output ``nu = eta2``, and adaptation ``om' = -gamma om sign(eta1) (w - nu)``.
    The multiplication by ``om`` keeps the estimate positive in continuous
    time; ``floor`` keeps it positive under fixed-step integration as well.
    """

    def __init__(self, omega_init: float, gamma: float, floor: float = DEFAULT_OMEGA_FLOOR,
                 deadzone: float = 0.0):
        if omega_init <= 0:
            raise ValueError("initial frequency estimate must be positive")
        if floor <= 0:
            raise ValueError("floor must be positive")
        self.eta1 = 0.0
        self.eta2 = 0.0
        self.omega = max(omega_init, floor)
        self.gamma = gamma
        self.floor = floor
        self.deadzone = deadzone

    def _rhs(self, e1, e2, om, w):
        return (
            e2,
            -om * om * e1 - 2.0 * om * e2 + 2.0 * om * w,
            -self.gamma * om * _sign(e1, self.deadzone) * (w - e2),
        )

    def step(self, w: float, dt: float) -> tuple[float, float]:
        """Advance one RK4 step with ``w`` held; returns ``(nu, omega)``."""
        e1, e2, om = self.eta1, self.eta2, self.omega
        a1, a2, a3 = self._rhs(e1, e2, om, w)
        h = 0.5 * dt
        b1, b2, b3 = self._rhs(e1 + h * a1, e2 + h * a2, om + h * a3, w)
        c1, c2, c3 = self._rhs(e1 + h * b1, e2 + h * b2, om + h * b3, w)
        d1, d2, d3 = self._rhs(e1 + dt * c1, e2 + dt * c2, om + dt * c3, w)
        s = dt / 6.0
        self.eta1 = e1 + s * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
        self.eta2 = e2 + s * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
        om = om + s * (a3 + 2.0 * b3 + 2.0 * c3 + d3)
        self.omega = om if om > self.floor else self.floor
        return self.eta2, self.omega


class BiasCanceller:
    """``w(t) = y(t) - y(t - pi/beta)``: removes a constant offset, keeps the frequency."""

    def __init__(self, beta: float, dt: float, omega_nominal: float | None = None):
        if beta <= 0:
            raise ValueError("beta must be positive")
        if omega_nominal is not None and not omega_nominal < beta < 3.0 * omega_nominal:
            warnings.warn(
                f"beta={beta:g} outside ({omega_nominal:g}, {3 * omega_nominal:g}) rad/s",
                stacklevel=2,
            )
        self.beta = beta
        self.delay = math.pi / beta
        self.buffer = DelayLine.for_delay(dt, self.delay)

    def step(self, y: float) -> float:
        self.buffer.push(y)
        return y - self.buffer.lookup(self.delay)


THETA_MODES = ("model", "heuristic")


def adaptive_theta(sys_nominal: LinearSSM, omega_t: float, mode: str = "model") -> float:
    """Delay for the current frequency estimate.

    ``model`` re-evaluates the plant phase lag at ``omega_t``; ``heuristic``
    uses the half period ``pi / omega_t`` and needs no model.
    """
    if omega_t <= 0:
        raise ValueError("frequency estimate must be positive")
    if mode == "model":
        return compute_theta(sys_nominal, omega_t)
    if mode == "heuristic":
        return math.pi / omega_t
    raise ValueError(f"unknown theta mode {mode!r}; expected one of {THETA_MODES}")


class ThetaSchedule:
    """First-order smoothing of the delay target derived from the estimate.

    Jumps of the target larger than half a period are counted and logged as
    phase-wrap events.
    """

    def __init__(self, sys_nominal: LinearSSM, omega_init: float, dt: float,
                 mode: str = "model", smoothing: float = 0.05):
        self.sys = sys_nominal
        self.mode = mode
        self.dt = dt
        self.smoothing = smoothing
        self.target = adaptive_theta(sys_nominal, omega_init, mode)
        self.theta = self.target
        self.wraps = 0

    def update(self, omega_t: float) -> float:
        target = adaptive_theta(self.sys, omega_t, self.mode)
        if abs(target - self.target) > math.pi / omega_t:
            self.wraps += 1
            log.debug("theta wrap at omega=%.4g: %.4g -> %.4g s", omega_t, self.target, target)
        self.target = target
        if self.smoothing > 0:
            self.theta += self.dt / self.smoothing * (target - self.theta)
        else:
            self.theta = target
        return self.theta
