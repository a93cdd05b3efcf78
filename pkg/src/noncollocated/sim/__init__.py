"""Closed-loop simulation of the constrained plant and the experiment registry."""

from .engine import (CONTROLLER_KINDS, EVENT_KINDS, ControllerParams, Event, EventTimeline,
                     Scenario, ScenarioConfig, TraceTable, run_scenario)
from .plant import Contact, Limits, NoiseModel, NonFinite, PlantState, measure, plant_step
from .scenarios import scenario_registry

__all__ = [
    "CONTROLLER_KINDS", "EVENT_KINDS", "Contact", "ControllerParams", "Event", "EventTimeline",
    "Limits", "NoiseModel", "NonFinite", "PlantState", "Scenario", "ScenarioConfig",
    "TraceTable", "measure", "plant_step", "run_scenario", "scenario_registry",
]
