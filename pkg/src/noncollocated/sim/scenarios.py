"""Named experiment configurations for the reference plant."""

from __future__ import annotations

import numpy as np

from ..control import GRAVITY_FEEDFORWARD_V
from ..design import (PAPER_CONTROLLER_POLES, PAPER_OBSERVER_POLES, place_observer,
                      place_state_feedback)
from ..ssm import equilibrium, paper_actuator, paper_plant
from .engine import ControllerParams, Event, EventTimeline, Scenario, ScenarioConfig
from .plant import NoiseModel

# operating points (active-mass position, m)
Z_MID = 0.0105
Z_LOW = 0.0055
STEP = 0.01

# sensor noise levels (m, one sigma)
NOISE_STD = 4e-6
# matches the +-12 um sensor repeatability; see observer_infeasible
NOISE_STD_OBSERVER = 1.2e-5

PUSH = 0.05  # payload velocity kick of a manual push (m/s)
OSC_INIT_DEFLECTION = 0.003  # initial spring elongation beyond equilibrium (m)


def _pi_integrator_init(f_eq: float, kappa: float, ki: float) -> float:
    # start the PI integrator so the loop sits at the gravity equilibrium
    return (f_eq / kappa - GRAVITY_FEEDFORWARD_V) / ki


def _free_fall() -> Scenario:
    sys, act = paper_plant(), paper_actuator()
    x0, f0 = equilibrium(sys, Z_MID)
    cfg = ScenarioConfig(
        "free_fall",
        controller=ControllerParams(kind="none", u_hold=f0 / act.kappa),
        noise=NoiseModel(NOISE_STD, 1),
        events=EventTimeline((Event(20.0, "input_cutoff"),)),
        t_end=40.0,
        x0=x0, f0=f0, r0=float(x0[3]),
    )
    return Scenario("free_fall", "input cut at rest; active mass drops onto its stop, payload rings",
                    (cfg,))


def _observer_infeasible() -> Scenario:
    sys = paper_plant()
    K = place_state_feedback(sys, PAPER_CONTROLLER_POLES)
    Q = place_observer(sys, PAPER_OBSERVER_POLES)
    x0, f0 = equilibrium(sys, Z_MID)
    r0 = float(K @ x0)
    events = EventTimeline((Event(1.0, "reference_step", r0 + 10.0),))
    variants = []
    for label, kind in (("with_observer", "observer_state_feedback"),
                        ("without_observer", "measured_state_feedback")):
        variants.append(ScenarioConfig(
            "observer_infeasible", label=label,
            controller=ControllerParams(kind=kind, K=tuple(K), Q=tuple(Q)),
            noise=NoiseModel(NOISE_STD_OBSERVER, 1),
            events=events, t_end=4.0, x0=x0, f0=f0, r0=r0))
    return Scenario("observer_infeasible",
                    "pole-placement state feedback with estimated vs measured states",
                    tuple(variants))


def _pi_base(z0: float, **ctrl) -> dict:
    sys, act = paper_plant(), paper_actuator()
    x0, f0 = equilibrium(sys, z0)
    params = dict(integ0=_pi_integrator_init(f0, act.kappa, 170.0), alpha=100.0)
    params.update(ctrl)
    return dict(controller=ControllerParams(**params), noise=NoiseModel(NOISE_STD, 1),
                x0=x0, f0=f0, r0=float(x0[3]))


def _pi_vs_delay() -> Scenario:
    variants = []
    for label, kind in (("pi_only", "pi_only"), ("pi_delay", "pi_plus_delay_fixed")):
        base = _pi_base(Z_LOW, kind=kind)
        y_ref = base["r0"] + STEP
        variants.append(ScenarioConfig(
            "pi_vs_delay", label=label,
            events=EventTimeline((Event(2.0, "reference_step", y_ref),)),
            t_end=14.0, **base))
    return Scenario("pi_vs_delay", "reference step under PI alone and PI plus fixed delay term",
                    tuple(variants))


def _adaptive_disturbed() -> Scenario:
    base = _pi_base(Z_LOW, kind="pi_plus_delay_adaptive", gamma=600.0, omega_init=40.0)
    y_ref = base["r0"] + STEP
    events = EventTimeline((
        Event(2.0, "reference_step", y_ref),
        Event(12.0, "load_impulse", -PUSH),
        Event(22.0, "load_impulse", PUSH),
    ))
    cfg = ScenarioConfig("adaptive_disturbed", events=events, t_end=32.0, **base)
    return Scenario("adaptive_disturbed",
                    "adaptive delay term; reference step, then a push down and a push up",
                    (cfg,))


def _adaptive_oscillatory_init() -> Scenario:
    base = _pi_base(Z_LOW, kind="pi_plus_delay_adaptive", gamma=600.0, omega_init=40.0)
    x0 = np.array(base.pop("x0"))
    x0[3] += OSC_INIT_DEFLECTION
    y_ref = base["r0"] + STEP
    cfg = ScenarioConfig(
        "adaptive_oscillatory_init",
        events=EventTimeline((Event(5.0, "reference_step", y_ref),)),
        t_end=15.0, x0=x0, **base)
    return Scenario("adaptive_oscillatory_init",
                    "adaptive delay term from a deflected payload, then a reference step",
                    (cfg,))


_BUILDERS = {
    "free_fall": _free_fall,
    "observer_infeasible": _observer_infeasible,
    "pi_vs_delay": _pi_vs_delay,
    "adaptive_disturbed": _adaptive_disturbed,
    "adaptive_oscillatory_init": _adaptive_oscillatory_init,
}


def scenario_registry() -> dict[str, Scenario]:
    """All named experiments, freshly built."""
    return {name: build() for name, build in _BUILDERS.items()}
