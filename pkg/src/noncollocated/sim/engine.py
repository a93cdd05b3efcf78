"""Scenario description and the fixed-step closed-loop runner."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..control import GRAVITY_FEEDFORWARD_V
from ..freq import compute_theta
from ..ssm import (ActuatorLag, LinearSSM, PhysicalParams, build_ssm_from_physical,
                   dominant_oscillatory_mode, paper_actuator, paper_plant)
from .plant import Contact, Limits, NoiseModel, NonFinite

log = logging.getLogger(__name__)

EVENT_KINDS = ("reference_step", "load_impulse", "input_cutoff", "input_restore")
CONTROLLER_KINDS = (
    "none",
    "pi_only",
    "pi_plus_delay_fixed",
    "pi_plus_delay_adaptive",
    "observer_state_feedback",
    "measured_state_feedback",
)
OBSERVER_INPUTS = ("realistic", "textbook")


@dataclass(frozen=True)
class Event:
    """``reference_step`` sets r to ``value`` (m, or N for state feedback);
    ``load_impulse`` adds ``value`` (m/s) to the payload velocity."""

    time: float
    kind: str
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.time < 0:
            raise ValueError("event times must be non-negative")


@dataclass(frozen=True)
class EventTimeline:
    events: tuple[Event, ...] = ()

    def __post_init__(self):
        ev = tuple(self.events)
        object.__setattr__(self, "events", ev)
        if any(b.time < a.time for a, b in zip(ev, ev[1:])):
            raise ValueError("events must be sorted by time")

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    def times(self, kind: str | None = None) -> list[float]:
        return [e.time for e in self.events if kind is None or e.kind == kind]


@dataclass(frozen=True)
class ControllerParams:
    """Parameters for every controller kind; each kind reads the ones it needs.

    ``None`` means derived from the plant at run time: ``theta`` from the
    plant phase at its damped frequency, ``omega_nominal`` from the plant
    mode, ``beta`` as 1.5 times the nominal frequency, ``xhat0`` as the
    initial plant state.  State-feedback gains ``K`` act in newtons;
    ``(r - K x) / kappa`` converts the command to volts.
    """

    kind: str = "none"
    u_hold: float = 0.0
    u_g: float = GRAVITY_FEEDFORWARD_V
    kp: float = 100.0
    ki: float = 170.0
    integ0: float = 0.0
    aw_gain: float = 0.0
    alpha: float = 0.0
    theta: float | None = None
    K: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    Q: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    xhat0: tuple[float, ...] | None = None
    observer_input: str = "realistic"
    gamma: float = 600.0
    omega_init: float = 40.0
    omega_floor: float = 0.1
    deadzone: float = 0.0
    beta: float | None = None
    theta_mode: str = "model"
    theta_smoothing: float = 0.05
    omega_nominal: float | None = None

    def __post_init__(self):
        if self.kind not in CONTROLLER_KINDS:
            raise ValueError(f"unknown controller kind {self.kind!r}")
        if self.observer_input not in OBSERVER_INPUTS:
            raise ValueError(f"observer_input must be one of {OBSERVER_INPUTS}")
        if self.theta_mode not in ("model", "heuristic"):
            raise ValueError("theta_mode must be 'model' or 'heuristic'")
        for name in ("K", "Q"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.xhat0 is not None:
            object.__setattr__(self, "xhat0", tuple(float(v) for v in self.xhat0))


@dataclass(frozen=True)
class ScenarioConfig:
    """One closed-loop simulation run."""

    name: str
    label: str = "main"
    plant: LinearSSM | PhysicalParams = field(default_factory=paper_plant)
    actuator: ActuatorLag = field(default_factory=paper_actuator)
    limits: Limits = field(default_factory=Limits)
    contact: Contact = field(default_factory=Contact)
    controller: ControllerParams = field(default_factory=ControllerParams)
    noise: NoiseModel = field(default_factory=NoiseModel)
    events: EventTimeline = field(default_factory=EventTimeline)
    dt: float = 0.0002
    t_end: float = 10.0
    x0: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    f0: float = 0.0
    r0: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end > self.dt:
            raise ValueError("t_end must exceed dt")
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        if len(self.x0) != self.ssm.n:
            raise ValueError("x0 length must match plant order")

    @property
    def ssm(self) -> LinearSSM:
        if isinstance(self.plant, PhysicalParams):
            return build_ssm_from_physical(self.plant)
        return self.plant

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class Scenario:
    """A named group of run variants (e.g. with and without observer)."""

    name: str
    description: str
    variants: tuple[ScenarioConfig, ...]

    def __getitem__(self, label: str) -> ScenarioConfig:
        for v in self.variants:
            if v.label == label:
                return v
        raise KeyError(f"{self.name} has no variant {label!r}; "
                       f"known: {[v.label for v in self.variants]}")

    @property
    def config(self) -> ScenarioConfig:
        """The first (primary) variant."""
        return self.variants[0]

    @property
    def controller(self) -> ControllerParams:
        return self.config.controller

    @property
    def events(self) -> EventTimeline:
        return self.config.events

    @property
    def labels(self) -> list[str]:
        return [v.label for v in self.variants]


class TraceTable:
    """Per-step record of all loop signals, one numpy column per signal."""

    def __init__(self, columns: dict[str, np.ndarray], meta: dict | None = None):
        self.columns = columns
        self.meta = meta or {}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def __len__(self) -> int:
        return len(self.columns["t"])

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def window(self, name: str, t0: float, t1: float) -> np.ndarray:
        t = self.columns["t"]
        return self.columns[name][(t >= t0) & (t < t1)]

    def to_csv(self, path, decimation: int = 10) -> None:
        if decimation < 1:
            raise ValueError("decimation must be >= 1")
        cols = [self.columns[n][::decimation] for n in self.names]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.names)
            for row in zip(*cols):
                w.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path) -> "TraceTable":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
        return cls({n: body[:, i] for i, n in enumerate(header)})

    def equals(self, other: "TraceTable") -> bool:
        """Bitwise equality of all columns."""
        return self.names == other.names and all(
            np.array_equal(self[n], other[n]) for n in self.names)


_CTRL_CODES = {
    "none": 0,
    "pi_only": 1,
    "pi_plus_delay_fixed": 1,
    "pi_plus_delay_adaptive": 1,
    "observer_state_feedback": 2,
    "measured_state_feedback": 3,
}
_EVENT_CODES = {k: i for i, k in enumerate(EVENT_KINDS)}


def resolved_controller(cfg: ScenarioConfig) -> dict:
    """Controller parameters with all plant-derived defaults filled in."""
    c = cfg.controller
    sys = cfg.ssm
    omega_nom = c.omega_nominal
    if omega_nom is None:
        omega_nom = dominant_oscillatory_mode(sys).omega
    theta = c.theta if c.theta is not None else compute_theta(sys, omega_nom)
    beta = c.beta if c.beta is not None else 1.5 * omega_nom
    xhat0 = c.xhat0 if c.xhat0 is not None else cfg.x0
    return dict(omega_nominal=omega_nom, theta=theta, beta=beta, xhat0=xhat0)


def kernel_params(cfg: ScenarioConfig) -> dict:
    """Flatten a scenario into the plain arrays and scalars the kernels take."""
    sys = cfg.ssm
    c = cfg.controller
    res = resolved_controller(cfg)
    adaptive = c.kind == "pi_plus_delay_adaptive"
    alpha = 0.0 if c.kind == "pi_only" else c.alpha
    n = cfg.n_steps
    if adaptive:
        theta_max = 2.0 * math.pi / c.omega_floor
        theta0 = float("nan")  # set by the schedule from omega_init
    else:
        theta_max = res["theta"]
        theta0 = res["theta"]
    ev = list(cfg.events)
    return dict(
        A=np.ascontiguousarray(sys.A, dtype=float),
        B=np.ascontiguousarray(sys.B, dtype=float),
        C=np.ascontiguousarray(sys.C, dtype=float),
        Doff=np.ascontiguousarray(sys.Doff, dtype=float),
        kappa=float(cfg.actuator.kappa),
        tau=float(cfg.actuator.tau),
        dt=float(cfg.dt),
        n_steps=n,
        x0=np.array(cfg.x0, dtype=float),
        f0=float(cfg.f0),
        r0=float(cfg.r0),
        z_min=cfg.limits.z_min,
        z_max=cfg.limits.z_max,
        u_min=cfg.limits.u_min,
        u_max=cfg.limits.u_max,
        contact=0 if cfg.contact.mode == "inelastic" else 1,
        k_wall=float(cfg.contact.k_wall),
        c_wall=float(cfg.contact.c_wall),
        ctrl=_CTRL_CODES[c.kind],
        adaptive=int(adaptive),
        u_hold=float(c.u_hold),
        u_g=float(c.u_g),
        kp=float(c.kp),
        ki=float(c.ki),
        integ0=float(c.integ0),
        aw_gain=float(c.aw_gain),
        alpha=float(alpha),
        theta0=theta0,
        theta_max=float(theta_max),
        K=np.array(c.K, dtype=float),
        Q=np.array(c.Q, dtype=float),
        xhat0=np.array(res["xhat0"], dtype=float),
        obs_input=OBSERVER_INPUTS.index(c.observer_input),
        omega_init=float(c.omega_init),
        gamma=float(c.gamma),
        omega_floor=float(c.omega_floor),
        deadzone=float(c.deadzone),
        beta=float(res["beta"]),
        theta_mode=0 if c.theta_mode == "model" else 1,
        theta_smoothing=float(c.theta_smoothing),
        ev_step=np.array([int(round(e.time / cfg.dt)) for e in ev], dtype=np.int64),
        ev_kind=np.array([_EVENT_CODES[e.kind] for e in ev], dtype=np.int64),
        ev_value=np.array([e.value for e in ev], dtype=float),
        noise=cfg.noise.samples(n),
    )


BASE_COLUMNS = ("t", "r", "y", "y_meas", "u_raw", "u_sat", "sat_flag",
                "z", "zdot", "ydot", "f_act")


def run_scenario(cfg: ScenarioConfig, backend: str | None = None) -> TraceTable:
    """Run the full loop: measure, estimate, control, saturate, step the plant.

    Deterministic: the same config (including noise seed) and backend give a
    bitwise identical trace.  Raises :class:`NonFinite` with the offending
    step index if the state blows up.
    """
    p = kernel_params(cfg)
    impl = kernels.get_backend(backend)
    cols, bad, wraps = impl.simulate(p)
    if bad >= 0:
        raise NonFinite(bad)
    if wraps:
        log.info("%s/%s: %d theta wrap events", cfg.name, cfg.label, wraps)
    names = list(BASE_COLUMNS)
    kind = cfg.controller.kind
    if kind.startswith("pi_plus_delay"):
        names.append("theta")
    if kind == "pi_plus_delay_adaptive":
        names.insert(names.index("theta"), "omega_t")
    if kind == "observer_state_feedback":
        names += ["xhat1", "xhat2", "xhat3", "xhat4"]
    return TraceTable({n: cols[n] for n in names},
                      meta={"scenario": cfg.name, "label": cfg.label,
                            "backend": impl.NAME, "theta_wraps": wraps})
