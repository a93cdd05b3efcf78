"""Pole placement for the single-input plant: Ackermann gains and rank tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .ssm import LinearSSM


class NotControllable(ValueError):
    pass


class NotObservable(ValueError):
    pass


class IllConditioned(ArithmeticError):
    pass


@dataclass(frozen=True)
class PoleSet:
    poles: tuple[complex, ...]

    def __post_init__(self):
        p = tuple(complex(v) for v in self.poles)
        object.__setattr__(self, "poles", p)
        if any(v.real >= 0 for v in p):
            raise ValueError("desired poles must lie in the open left half-plane")
        unpaired = sorted((v for v in p if v.imag > 0), key=lambda c: (c.real, c.imag))
        conj = sorted((v.conjugate() for v in p if v.imag < 0), key=lambda c: (c.real, c.imag))
        if not np.allclose(unpaired, conj, rtol=1e-12, atol=0.0) or len(unpaired) != len(conj):
            raise ValueError("complex poles must come in conjugate pairs")

    def __len__(self):
        return len(self.poles)

    def char_poly(self) -> np.ndarray:
        """Monic characteristic polynomial, highest power first.

        Accumulated in extended precision; coefficients reach ~1e11 for
        poles near -500.
        """
        c = np.array([1.0 + 0j], dtype=np.clongdouble)
        for p in self.poles:
            c = np.append(c, 0) - np.append(0, c) * np.clongdouble(p)
        return np.real(c).astype(float)


def ctrb(A, B) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    cols = [np.asarray(B, dtype=float).ravel()]
    for _ in range(A.shape[0] - 1):
        cols.append(A @ cols[-1])
    return np.column_stack(cols)


def _rank(M: np.ndarray) -> int:
    if not M.any():
        return 0
    _, R, _ = scipy.linalg.qr(M, pivoting=True)
    d = np.abs(np.diag(R))
    tol = max(M.shape) * np.finfo(float).eps * np.linalg.norm(M, 2)
    return int(np.sum(d > tol))


def controllable(sys: LinearSSM) -> tuple[bool, int]:
    r = _rank(ctrb(sys.A, sys.B))
    return r == sys.n, r


def observable(sys: LinearSSM) -> tuple[bool, int]:
    r = _rank(ctrb(sys.A.T, sys.C))
    return r == sys.n, r


def dual(sys: LinearSSM) -> LinearSSM:
    return LinearSSM(sys.A.T, sys.C, sys.B)


ILL_CONDITIONED_TOL = 1e-6


def _ackermann(A: np.ndarray, b: np.ndarray, desired: PoleSet) -> np.ndarray:
    n = A.shape[0]
    if len(desired) != n:
        raise ValueError(f"need {n} poles, got {len(desired)}")
    coeffs = desired.char_poly()
    # Horner on matrices: chi(A) = (((A + c1 I) A + c2 I) A + ...) + cn I
    chi = np.eye(n)
    for c in coeffs[1:]:
        chi = chi @ A + c * np.eye(n)
    Cm = ctrb(A, b)
    # the left residual of the explicit inverse grows with cond(Cm), unlike a
    # single backward-stable solve
    Cinv = np.linalg.inv(Cm)
    resid = np.linalg.norm(Cinv @ Cm - np.eye(n), np.inf)
    if not np.isfinite(resid) or resid > ILL_CONDITIONED_TOL:
        raise IllConditioned(f"controllability matrix inversion residual {resid:.3g}")
    v = Cinv[-1]
    return v @ chi


def place_state_feedback(sys: LinearSSM, desired: PoleSet | list) -> np.ndarray:
    """Gain row ``K`` with ``eig(A - B K)`` equal to ``desired``."""
    if not isinstance(desired, PoleSet):
        desired = PoleSet(tuple(desired))
    ok, r = controllable(sys)
    if not ok:
        raise NotControllable(f"controllability rank {r} < {sys.n}")
    return _ackermann(sys.A, sys.B, desired)


def place_observer(sys: LinearSSM, desired: PoleSet | list) -> np.ndarray:
    """Observer gain column ``Q`` with ``eig(A - Q C)`` equal to ``desired``."""
    ok, r = observable(sys)
    if not ok:
        raise NotObservable(f"observability rank {r} < {sys.n}")
    return place_state_feedback(dual(sys), desired)


PAPER_CONTROLLER_POLES = (-40.0, -42.0, -44.0, -60.0)
PAPER_OBSERVER_POLES = (-498.0, -503.0, -508.0, -513.0)
