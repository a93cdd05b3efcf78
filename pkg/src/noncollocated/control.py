"""Runtime controller blocks, each advanced once per fixed solver step.

All blocks are small mutable state machines owned by a single simulation.
"""

from __future__ import annotations

import math

import numpy as np

from .ssm import LinearSSM

GRAVITY_FEEDFORWARD_V = 4.035


class DelayLine:
    """Ring buffer of samples at a fixed rate with linearly interpolated lookup.

    ``lookup(d)`` returns the signal ``d`` seconds before the newest sample.
    Until enough history exists the oldest stored sample is returned
    (constant-history padding).
    """

    def __init__(self, dt: float, capacity: int):
        if dt <= 0:
            raise ValueError("dt must be positive")
        if capacity < 2:
            raise ValueError("capacity must be at least 2")
        self.dt = dt
        self.capacity = capacity
        self._buf = [0.0] * capacity
        self._head = -1
        self.count = 0

    @classmethod
    def for_delay(cls, dt: float, max_delay: float) -> "DelayLine":
        return cls(dt, math.ceil(max_delay / dt) + 2)

    @property
    def span(self) -> float:
        return (self.capacity - 2) * self.dt

    def push(self, value: float) -> None:
        self._head = (self._head + 1) % self.capacity
        self._buf[self._head] = value
        if self.count < self.capacity:
            self.count += 1

    def _ago(self, k: int) -> float:
        return self._buf[(self._head - k) % self.capacity]

    def lookup(self, delay: float) -> float:
        if self.count == 0:
            raise LookupError("delay line is empty")
        if delay < 0:
            raise ValueError("delay must be non-negative")
        if delay > self.span * (1.0 + 1e-12):
            raise ValueError(f"delay {delay:g} s exceeds buffer span {self.span:g} s")
        d = delay / self.dt
        i0 = int(d)
        if i0 + 1 >= self.count:
            return self._ago(self.count - 1)
        frac = d - i0
        s0 = self._ago(i0)
        return s0 + frac * (self._ago(i0 + 1) - s0)


class DelayCompensator:
    """Oscillation-canceling feedback ``alpha * (y(t) - y(t - theta))``."""

    def __init__(self, alpha: float, theta: float, dt: float, max_theta: float | None = None):
        if theta < 0:
            raise ValueError("theta must be non-negative")
        self.alpha = alpha
        self.theta = theta
        self.buffer = DelayLine.for_delay(dt, max(theta, max_theta or 0.0))

    def step(self, y: float) -> float:
        self.buffer.push(y)
        return self.alpha * (y - self.buffer.lookup(self.theta))


class PIController:
    """``kp * e + ki * integral(e)`` with optional back-calculation anti-windup.

    ``aw_gain`` (1/s) feeds the saturation excess ``u_applied - u_raw`` of the
    previous step back into the integrator; zero disables it, leaving the
    integrator a plain rectangle-rule sum of ``e * dt``.
    """

    def __init__(self, kp: float, ki: float, integ: float = 0.0, aw_gain: float = 0.0):
        self.kp = kp
        self.ki = ki
        self.integ = integ
        self.aw_gain = aw_gain

    def step(self, e: float, dt: float, excess: float = 0.0) -> float:
        if dt <= 0:
            raise ValueError("dt must be positive")
        inc = e
        if self.aw_gain and self.ki:
            inc += self.aw_gain / self.ki * excess
        self.integ += inc * dt
        return self.kp * e + self.ki * self.integ


class Observer:
    """Luenberger observer ``xhat' = A xhat + B f + Doff + Q (y - C xhat)``.

    ``f`` is whatever force signal the observer is given.  With the commanded
    force ``f = f_ref - K xhat`` this is the closed-loop estimation dynamics
    ``(A - BK - QC) xhat + B f_ref + Q y``.
    """

    def __init__(self, sys: LinearSSM, K, Q, xhat0=None, include_offset: bool = True):
        n = sys.n
        self.n = n
        self.K = np.asarray(K, dtype=float).reshape(n)
        self.Q = np.asarray(Q, dtype=float).reshape(n)
        self.xhat = np.zeros(n) if xhat0 is None else np.array(xhat0, dtype=float)
        # scalar lists: a fixed summation order the compiled kernel can mirror
        self._A = (sys.A - np.outer(self.Q, sys.C)).tolist()
        self._B = sys.B.tolist()
        self._d = sys.Doff.tolist() if include_offset else [0.0] * n
        self._q = self.Q.tolist()

    def _rhs(self, x, f, y):
        out = []
        for i in range(self.n):
            row = self._A[i]
            acc = 0.0
            for j in range(self.n):
                acc += row[j] * x[j]
            out.append(acc + self._B[i] * f + self._d[i] + self._q[i] * y)
        return out

    def step(self, f: float, y: float, dt: float) -> np.ndarray:
        if dt <= 0:
            raise ValueError("dt must be positive")
        x = self.xhat.tolist()
        n = self.n
        h = 0.5 * dt
        k1 = self._rhs(x, f, y)
        k2 = self._rhs([x[i] + h * k1[i] for i in range(n)], f, y)
        k3 = self._rhs([x[i] + h * k2[i] for i in range(n)], f, y)
        k4 = self._rhs([x[i] + dt * k3[i] for i in range(n)], f, y)
        c = dt / 6.0
        self.xhat = np.array([x[i] + c * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                              for i in range(n)])
        return self.xhat


def state_feedback(K, xhat, r: float, u_ff: float = 0.0, gain: float = 1.0) -> float:
    """``(r - K xhat) / gain + u_ff`` with no reference pre-filter.

    ``gain`` converts the force-level command to actuator volts (``kappa``);
    ``u_ff`` is the constant gravity feedforward.
    """
    return (r - float(np.dot(K, xhat))) / gain + u_ff


def combined_law(pi: PIController, comp: DelayCompensator, r: float, y: float, dt: float,
                 u_g: float = GRAVITY_FEEDFORWARD_V, excess: float = 0.0) -> float:
    """PI tracking plus delay compensation plus gravity feedforward."""
    return pi.step(r - y, dt, excess) + comp.step(y) + u_g


def saturate(u: float, lo: float, hi: float) -> tuple[float, bool]:
    if not lo < hi:
        raise ValueError("lo must be below hi")
    if u < lo:
        return lo, True
    if u > hi:
        return hi, True
    return u, False
