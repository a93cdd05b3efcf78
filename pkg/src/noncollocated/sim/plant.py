"""Constrained plant stepping and output measurement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..ssm import ActuatorLag, LinearSSM


class NonFinite(FloatingPointError):
    """A simulated state left the finite range."""

    def __init__(self, step: int, detail: str = ""):
        self.step = step
        super().__init__(f"non-finite state at step {step}{': ' + detail if detail else ''}")


@dataclass(frozen=True)
class Limits:
    """Travel range of the active mass (m) and admissible input voltage (V)."""

    z_min: float = 0.0
    z_max: float = 0.021
    u_min: float = 0.0
    u_max: float = 10.0

    def __post_init__(self):
        if not self.z_min < self.z_max:
            raise ValueError("z_min must be below z_max")
        if not self.u_min < self.u_max:
            raise ValueError("u_min must be below u_max")


CONTACT_MODES = ("inelastic", "penalty")


@dataclass(frozen=True)
class Contact:
    """Travel-stop model.

    ``inelastic`` clamps z into range after every step and zeroes the
    velocity component heading into the stop.  ``penalty`` instead adds a
    one-sided spring-damper wall force (``k_wall``, ``c_wall``); z may then
    penetrate the stop slightly.
    """

    mode: str = "inelastic"
    k_wall: float = 1e5
    c_wall: float = 1e2

    def __post_init__(self):
        if self.mode not in CONTACT_MODES:
            raise ValueError(f"contact mode must be one of {CONTACT_MODES}")


@dataclass
class PlantState:
    """Plant state ``x = (zdot, z, ydot, y)``, actuator force and time."""

    x: np.ndarray
    f_act: float = 0.0
    t: float = 0.0

    @property
    def y(self) -> float:
        return float(self.x[3])


def _wall_force(z, zd, lim: Limits, contact: Contact) -> float:
    if z < lim.z_min:
        return max(0.0, -contact.k_wall * (z - lim.z_min) - contact.c_wall * zd)
    if z > lim.z_max:
        return min(0.0, -contact.k_wall * (z - lim.z_max) - contact.c_wall * zd)
    return 0.0


def _rhs(s, A, B, D, kappa, tau, u, lim, contact):
    # s = [zdot, z, ydot, y, f]
    if tau > 0.0:
        force = s[4]
        fd = (kappa * u - s[4]) / tau
    else:
        force = kappa * u
        fd = 0.0
    if contact is not None and contact.mode == "penalty":
        force = force + _wall_force(s[1], s[0], lim, contact)
    out = [0.0] * 5
    for i in range(4):
        row = A[i]
        out[i] = (row[0] * s[0] + row[1] * s[1] + row[2] * s[2] + row[3] * s[3]
                  + B[i] * force + D[i])
    out[4] = fd
    return out


def rk4_plant(s: list, A, B, D, kappa: float, tau: float, u: float, dt: float,
              lim: Limits | None = None, contact: Contact | None = None) -> list:
    """One RK4 step of the 5-state (plant + actuator) model; lists of floats in/out."""
    k1 = _rhs(s, A, B, D, kappa, tau, u, lim, contact)
    h = 0.5 * dt
    k2 = _rhs([s[i] + h * k1[i] for i in range(5)], A, B, D, kappa, tau, u, lim, contact)
    k3 = _rhs([s[i] + h * k2[i] for i in range(5)], A, B, D, kappa, tau, u, lim, contact)
    k4 = _rhs([s[i] + dt * k3[i] for i in range(5)], A, B, D, kappa, tau, u, lim, contact)
    c = dt / 6.0
    out = [s[i] + c * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(5)]
    if tau <= 0.0:
        out[4] = kappa * u
    if lim is not None and (contact is None or contact.mode == "inelastic"):
        if out[1] < lim.z_min:
            out[1] = lim.z_min
            if out[0] < 0.0:
                out[0] = 0.0
        elif out[1] > lim.z_max:
            out[1] = lim.z_max
            if out[0] > 0.0:
                out[0] = 0.0
    return out


def plant_step(st: PlantState, sys: LinearSSM, act: ActuatorLag, u: float, dt: float,
               limits: Limits | None = None, contact: Contact | None = None) -> PlantState:
    """Advance plant and actuator lag by one RK4 step with ``u`` held.

    ``u`` must already be saturated.  Raises :class:`NonFinite` if the new
    state is not finite.
    """
    s = [float(v) for v in st.x] + [float(st.f_act)]
    out = rk4_plant(s, sys.A.tolist(), sys.B.tolist(), sys.Doff.tolist(),
                    act.kappa, act.tau, u, dt, limits, contact)
    if not all(math.isfinite(v) for v in out):
        raise NonFinite(round(st.t / dt), "plant state")
    return PlantState(np.array(out[:4]), out[4], st.t + dt)


@dataclass(frozen=True)
class NoiseModel:
    """Additive zero-mean Gaussian output noise with a fixed seed."""

    std: float = 4e-6
    seed: int = 1
    kind: str = "gaussian"

    def __post_init__(self):
        if self.std < 0:
            raise ValueError("noise std must be non-negative")
        if self.kind != "gaussian":
            raise ValueError("only gaussian noise is supported")

    def source(self) -> "NoiseSource":
        return NoiseSource(self)

    def samples(self, n: int) -> np.ndarray:
        """The first ``n`` values of the stream, as :meth:`source` would draw them."""
        if self.std == 0:
            return np.zeros(n)
        return np.random.default_rng(self.seed).normal(0.0, self.std, n)


@dataclass
class NoiseSource:
    model: NoiseModel
    rng: np.random.Generator = field(init=False)

    def __post_init__(self):
        self.rng = np.random.default_rng(self.model.seed)

    def draw(self) -> float:
        if self.model.std == 0:
            return 0.0
        return float(self.rng.normal(0.0, self.model.std))


def measure(st: PlantState, noise: NoiseSource) -> float:
    """Noisy reading of the payload position."""
    return st.y + noise.draw()
