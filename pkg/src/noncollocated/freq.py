"""Frequency responses, sensitivity peaks, stability margins and delay reshaping.

Loop transfer functions are plain callables mapping an array of angular
frequencies (rad/s) to complex values, so they compose by multiplication::

    L = with_actuator(open_loop_measured(sys, K), ActuatorLag(1.0, 0.0012))
    report = sensitivity_peak(L, default_grid())
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ssm import ActuatorLag, LinearSSM

LoopFn = Callable[[np.ndarray], np.ndarray]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class SingularAtFrequency(ArithmeticError):
    """``i*omega*I - A`` (or the observer loop matrix) is singular."""


@dataclass(frozen=True)
class FreqGrid:
    omegas: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("grid must be a non-empty 1-D sequence")
        if np.any(w <= 0) or np.any(np.diff(w) <= 0):
            raise ValueError("grid must be positive and strictly increasing")
        object.__setattr__(self, "omegas", w)

    def __len__(self):
        return self.omegas.size

    @classmethod
    def log(cls, lo: float, hi: float, n: int) -> "FreqGrid":
        return cls(np.logspace(math.log10(lo), math.log10(hi), n))


def default_grid() -> FreqGrid:
    return FreqGrid.log(0.1, 1e4, 2000)


@dataclass(frozen=True)
class FreqResponse:
    grid: FreqGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.omegas.shape:
            raise ValueError("one value per grid point required")
        object.__setattr__(self, "values", v)

    @property
    def mag_db(self) -> np.ndarray:
        return 20.0 * np.log10(np.abs(self.values))

    @property
    def phase_deg(self) -> np.ndarray:
        return np.degrees(np.unwrap(np.angle(self.values)))

    @classmethod
    def sample(cls, fn: LoopFn, grid: FreqGrid) -> "FreqResponse":
        return cls(grid, fn(grid.omegas))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["omega_rad_s", "re", "im", "mag_db", "phase_deg"])
            for row in zip(self.grid.omegas, self.values.real, self.values.imag,
                           self.mag_db, self.phase_deg):
                w.writerow([f"{v:.17g}" for v in row])


@dataclass(frozen=True)
class MarginReport:
    """Gain/phase margins and sensitivity peak.

    ``None`` marks quantities that were not computed; an absent crossover
    gives an infinite margin and a ``None`` crossover frequency.
    """

    gain_margin_db: float | None = None
    phase_margin_deg: float | None = None
    gain_crossover: float | None = None
    phase_crossover: float | None = None
    s_max_db: float | None = None
    s_max_freq: float | None = None

    @property
    def closed_loop_unstable(self) -> bool:
        gm = self.gain_margin_db
        pm = self.phase_margin_deg
        return (gm is not None and gm < 0) or (pm is not None and pm < 0)


def _as_omegas(omega) -> tuple[np.ndarray, bool]:
    w = np.asarray(omega, dtype=float)
    return np.atleast_1d(w), w.ndim == 0


def _batched_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    # M: (k, n, n), rhs: (k, n)
    cond = np.linalg.cond(M)
    if not np.all(np.isfinite(cond)) or np.any(cond > 1.0 / np.finfo(float).eps):
        raise SingularAtFrequency("system matrix is numerically singular")
    return np.linalg.solve(M, rhs[..., None])[..., 0]


def resolvent_apply(A: np.ndarray, omega, rhs: np.ndarray) -> np.ndarray:
    """``(i*omega*I - A)^{-1} rhs`` for each frequency, shape ``(k, n)``."""
    w, _ = _as_omegas(omega)
    n = A.shape[0]
    M = 1j * w[:, None, None] * np.eye(n) - A
    r = np.broadcast_to(np.asarray(rhs, dtype=complex), (w.size, n))
    return _batched_solve(M, r)


def eval_tf(sys: LinearSSM, omega):
    """``G(i omega) = C (i omega I - A)^{-1} B``; ``Doff`` plays no part.

    Accepts a scalar (returns complex) or an array of frequencies.
    """
    w, scalar = _as_omegas(omega)
    g = resolvent_apply(sys.A, w, sys.B) @ sys.C
    return complex(g[0]) if scalar else g


def eval_actuator(act: ActuatorLag, omega):
    w, scalar = _as_omegas(omega)
    v = act.kappa / (1.0 + 1j * w * act.tau)
    return complex(v[0]) if scalar else v


def plant_tf(sys: LinearSSM, act: ActuatorLag | None = None) -> LoopFn:
    """Frequency response from actuator voltage (or force, without ``act``) to y."""
    if act is None:
        return lambda w: eval_tf(sys, w)
    return lambda w: eval_actuator(act, w) * eval_tf(sys, w)


def with_actuator(L: LoopFn, act: ActuatorLag) -> LoopFn:
    return lambda w: eval_actuator(act, w) * L(w)


def _scalarize(fn: LoopFn) -> LoopFn:
    def wrapped(omega):
        w, scalar = _as_omegas(omega)
        v = fn(w)
        return complex(v[0]) if scalar else v
    return wrapped


def open_loop_measured(sys: LinearSSM, K) -> LoopFn:
    """``L_m(i omega) = K (i omega I - A)^{-1} B`` for full-state feedback."""
    K = np.asarray(K, dtype=float).reshape(sys.n)
    return _scalarize(lambda w: resolvent_apply(sys.A, w, sys.B) @ K)


def open_loop_observer(sys: LinearSSM, K, Q) -> LoopFn:
    """Loop broken at the plant input of observer-based state feedback.

    ``L_o = K (i omega I - A + B K + Q C)^{-1} (B + Q G(i omega))``.
    """
    K = np.asarray(K, dtype=float).reshape(sys.n)
    Q = np.asarray(Q, dtype=float).reshape(sys.n)
    Aobs = sys.A - np.outer(sys.B, K) - np.outer(Q, sys.C)

    def L(w):
        g = eval_tf(sys, w)
        rhs = sys.B[None, :] + Q[None, :] * g[:, None]
        n = sys.n
        M = 1j * w[:, None, None] * np.eye(n) - Aobs
        return _batched_solve(M, rhs) @ K

    return _scalarize(L)


def _golden_max(f, a: float, b: float, rtol: float = 1e-6) -> float:
    # f maximised over log-frequency on [a, b]
    la, lb = math.log(a), math.log(b)
    c = lb - _GOLDEN * (lb - la)
    d = la + _GOLDEN * (lb - la)
    fc, fd = f(math.exp(c)), f(math.exp(d))
    while lb - la > rtol:
        if fc > fd:
            lb, d, fd = d, c, fc
            c = lb - _GOLDEN * (lb - la)
            fc = f(math.exp(c))
        else:
            la, c, fc = c, d, fd
            d = la + _GOLDEN * (lb - la)
            fd = f(math.exp(d))
    return math.exp(0.5 * (la + lb))


def sensitivity_peak(L: LoopFn, grid: FreqGrid) -> MarginReport:
    """Peak of ``|1 / (1 + L)|`` over the grid, refined by golden-section search."""
    w = grid.omegas
    s = np.abs(1.0 / (1.0 + L(w)))
    i = int(np.argmax(s))
    peak_w, peak = w[i], s[i]
    if w.size > 1:
        lo, hi = w[max(i - 1, 0)], w[min(i + 1, w.size - 1)]
        mag = lambda om: float(np.abs(1.0 / (1.0 + L(np.array([om])))[0]))
        wr = _golden_max(mag, lo, hi)
        sr = mag(wr)
        if sr > peak:
            peak_w, peak = wr, sr
    return MarginReport(s_max_db=20.0 * math.log10(peak), s_max_freq=float(peak_w))


def _bisect(f, a: float, b: float, rtol: float = 1e-10) -> float:
    fa = f(a)
    la, lb = math.log(a), math.log(b)
    while lb - la > rtol:
        lm = 0.5 * (la + lb)
        fm = f(math.exp(lm))
        if (fm > 0) == (fa > 0):
            la, fa = lm, fm
        else:
            lb = lm
    return math.exp(0.5 * (la + lb))


def margins(L: LoopFn, grid: FreqGrid) -> MarginReport:
    """Gain and phase margins of loop ``L`` plus its sensitivity peak.

    The phase is unwrapped along the grid.  When several crossovers exist the
    one whose margin is smallest in magnitude is reported.
    """
    w = grid.omegas
    Lw = L(w)
    mag = np.abs(Lw)
    ph = np.unwrap(np.angle(Lw))

    def cont_phase(om, ref):
        p = np.angle(L(np.array([om]))[0])
        return p + 2 * math.pi * round((ref - p) / (2 * math.pi))

    pm_best = gc_best = None
    logmag = np.log(mag)
    for i in np.nonzero(np.sign(logmag[:-1]) * np.sign(logmag[1:]) < 0)[0]:
        wc = _bisect(lambda om: math.log(abs(L(np.array([om]))[0])), w[i], w[i + 1])
        pm = math.degrees(cont_phase(wc, ph[i])) + 180.0
        pm = (pm + 180.0) % 360.0 - 180.0
        if pm_best is None or abs(pm) < abs(pm_best):
            pm_best, gc_best = pm, wc

    gm_best = pc_best = None
    # index of the -180 deg (mod 360) band each sample lies in
    band = np.floor((ph + math.pi) / (2 * math.pi))
    for i in np.nonzero(np.diff(band) != 0)[0]:
        target = -math.pi + 2 * math.pi * max(band[i], band[i + 1])

        def g(om, ref=ph[i], target=target):
            return cont_phase(om, ref) - target

        wp = _bisect(g, w[i], w[i + 1])
        gm = -20.0 * math.log10(abs(L(np.array([wp]))[0]))
        if gm_best is None or abs(gm) < abs(gm_best):
            gm_best, pc_best = gm, wp

    sp = sensitivity_peak(L, grid)
    return MarginReport(
        gain_margin_db=math.inf if gm_best is None else gm_best,
        phase_margin_deg=math.inf if pm_best is None else pm_best,
        gain_crossover=gc_best,
        phase_crossover=pc_best,
        s_max_db=sp.s_max_db,
        s_max_freq=sp.s_max_freq,
    )


def delay_control_response(alpha: float, theta: float, omega):
    """``alpha * (1 - exp(-i omega theta))``."""
    w, scalar = _as_omegas(omega)
    v = alpha * (1.0 - np.exp(-1j * w * theta))
    return complex(v[0]) if scalar else v


def reshape_ratio(sys: LinearSSM, alpha: float, theta: float, omega,
                  act: ActuatorLag | None = None):
    """``G / G_cl = 1 - G U_d`` for the delay feedback closed around ``G``.

    ``G`` includes ``act`` when given (voltage input).
    """
    w, scalar = _as_omegas(omega)
    v = 1.0 - plant_tf(sys, act)(w) * delay_control_response(alpha, theta, w)
    return complex(v[0]) if scalar else v


def reshape_ratio_rational(sys: LinearSSM, alpha: float, theta: float, omega,
                           act: ActuatorLag | None = None):
    """Same ratio via numerator/denominator polynomials of ``G``.

    Independent route: ``G = N/P`` with ``P = det(sI - A)`` and
    ``N = C adj(sI - A) B``, both from the characteristic polynomial.
    """
    w, scalar = _as_omegas(omega)
    A, B, C = sys.A, sys.B, sys.C
    n = sys.n
    P = np.poly(A)
    # Faddeev-LeVerrier: adj(sI - A) = sum_k s^(n-1-k) M_k
    Mk = np.eye(n)
    num = np.zeros(n)
    for k in range(n):
        num[k] = C @ Mk @ B
        Mk = A @ Mk + P[k + 1] * np.eye(n)
    s = 1j * w
    N = np.polyval(num, s)
    if act is not None:
        N = N * act.kappa / (1.0 + act.tau * s)
    v = 1.0 - N * delay_control_response(alpha, theta, w) / np.polyval(P, s)
    return complex(v[0]) if scalar else v


def compute_theta(sys: LinearSSM, omega: float) -> float:
    """Delay matching the plant phase lag at ``omega``.

    ``theta = -arg G(i omega) / omega`` with the principal argument, shifted by
    one period when that would be non-positive, so ``0 < theta <= 2 pi/omega``.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    phase = cmath.phase(eval_tf(sys, omega))
    if -phase > 0:
        return float(-phase / omega)
    return float((-phase + 2.0 * math.pi) / omega)
