"""Plant model types for the two-mass non-collocated system.

State ordering for the fourth-order plant is ``x = (zdot, z, ydot, y)``:
velocity and position of the actuated (active) mass, then of the elastically
attached payload (passive mass).  Only ``y`` is measured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import eigvals

GRAVITY = 9.806


class NoOscillatoryMode(ValueError):
    """The system matrix has a purely real spectrum."""


def _frozen(a, shape) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PhysicalParams:
    """Masses, link and loads of the two-mass system (SI units).

    ``zeta`` is the link damping, ``sigma`` the viscous damping of the
    actuator, ``phi``/``Phi`` constant loads on the active/passive mass.
    """

    m: float
    M: float
    k: float
    zeta: float = 0.0
    sigma: float = 0.0
    phi: float = 0.0
    Phi: float = 0.0

    def __post_init__(self):
        if not (self.m > 0 and self.M > 0 and self.k > 0):
            raise ValueError("masses and stiffness must be positive")
        if self.zeta < 0 or self.sigma < 0:
            raise ValueError("damping coefficients must be non-negative")


@dataclass(frozen=True, eq=False)
class LinearSSM:
    """Continuous-time model ``xdot = A x + B f + Doff``, ``y = C x``.

    ``Doff`` is a constant additive disturbance (gravity for the lab plant);
    there is no feedthrough term.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Doff: np.ndarray = field(default=None)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        n = A.shape[0]
        object.__setattr__(self, "A", _frozen(A, (n, n)))
        object.__setattr__(self, "B", _frozen(self.B, (n,)))
        object.__setattr__(self, "C", _frozen(self.C, (n,)))
        doff = np.zeros(n) if self.Doff is None else self.Doff
        object.__setattr__(self, "Doff", _frozen(doff, (n,)))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def without_offset(self) -> "LinearSSM":
        return LinearSSM(self.A, self.B, self.C, np.zeros(self.n))

    def __eq__(self, other):
        if not isinstance(other, LinearSSM):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("A", "B", "C", "Doff"))

    def __hash__(self):
        return hash(tuple(np.concatenate([self.A.ravel(), self.B, self.C, self.Doff])))


@dataclass(frozen=True)
class ActuatorLag:
    """First-order actuator ``F(s) = kappa / (tau s + 1)`` from volts to newtons."""

    kappa: float = 3.2811
    tau: float = 0.0012

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")


@dataclass(frozen=True)
class ModeInfo:
    omega0: float
    delta: float

    @property
    def omega(self) -> float:
        """Damped oscillation frequency."""
        return self.omega0 * math.sqrt(1.0 - self.delta**2)


def build_ssm_from_physical(p: PhysicalParams, coupling_sign: float = 1.0) -> LinearSSM:
    """Map physical parameters to the order-4 state-space model.

    ``coupling_sign`` sets the sign of the ``ydot`` entry in the active-mass
    row.  The identified lab matrix carries a positive entry there, which is
    the default.
    """
    m, M, k, zeta, sigma = p.m, p.M, p.k, p.zeta, p.sigma
    A = [
        [-(sigma + zeta) / m, -k / m, coupling_sign * zeta / m, k / m],
        [1.0, 0.0, 0.0, 0.0],
        [zeta / M, k / M, -zeta / M, -k / M],
        [0.0, 0.0, 1.0, 0.0],
    ]
    B = [1.0 / m, 0.0, 0.0, 0.0]
    C = [0.0, 0.0, 0.0, 1.0]
    Doff = [-p.phi / m, 0.0, -p.Phi / M, 0.0]
    return LinearSSM(A, B, C, Doff)


def paper_plant() -> LinearSSM:
    """Identified model of the voice-coil/payload laboratory setup."""
    A = [
        [-333.35, -333.33, 0.015, 333.33],
        [1.0, 0.0, 0.0, 0.0],
        [0.012, 266.66, -0.012, -266.66],
        [0.0, 0.0, 1.0, 0.0],
    ]
    return LinearSSM(A, [1.667, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0],
                     [-9.806, 0.0, -9.806, 0.0])


def paper_actuator() -> ActuatorLag:
    return ActuatorLag(kappa=3.2811, tau=0.0012)


def paper_physical_params() -> PhysicalParams:
    """Physical parameters back-solved from :func:`paper_plant`."""
    sys = paper_plant()
    A, B, D = sys.A, sys.B, sys.Doff
    m = 1.0 / B[0]
    k = -A[0, 1] * m
    M = k / A[2, 1]
    zeta = A[2, 0] * M
    sigma = -A[0, 0] * m - zeta
    return PhysicalParams(m=float(m), M=float(M), k=float(k), zeta=float(zeta),
                          sigma=float(sigma), phi=float(-D[0] * m), Phi=float(-D[2] * M))


def dominant_oscillatory_mode(sys: LinearSSM) -> ModeInfo:
    """Least-damped complex pole pair of ``sys.A``.

    Ties in damping ratio go to the lower natural frequency.
    """
    lam = eigvals(sys.A)
    best = None
    for ev in lam:
        if ev.imag <= 0.0:
            continue
        w0 = abs(ev)
        key = (-ev.real / w0, w0)
        if best is None or key < best:
            best = key
    if best is None:
        raise NoOscillatoryMode("all eigenvalues are real")
    return ModeInfo(omega0=float(best[1]), delta=float(best[0]))


def equilibrium(sys: LinearSSM, z: float) -> tuple[np.ndarray, float]:
    """Rest state with the active mass at ``z`` and the holding force.

    Solves the two force-balance rows of the plant (velocities zero) for the
    payload position and the actuator force.
    """
    A, B, D = sys.A, sys.B, sys.Doff
    M = np.array([[A[0, 3], B[0]], [A[2, 3], B[2]]])
    rhs = -np.array([A[0, 1] * z + D[0], A[2, 1] * z + D[2]])
    y, f = np.linalg.solve(M, rhs)
    return np.array([0.0, z, 0.0, y]), float(f)
