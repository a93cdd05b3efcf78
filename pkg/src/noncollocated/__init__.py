"""Time-delay oscillation control of non-collocated two-mass systems.

Analysis (frequency responses, margins, pole placement) and fixed-step
closed-loop simulation with actuator limits, sensor noise and online
frequency adaptation.
"""

from .ssm import (ActuatorLag, LinearSSM, ModeInfo, NoOscillatoryMode, PhysicalParams,
                  build_ssm_from_physical, dominant_oscillatory_mode, paper_actuator,
                  paper_physical_params, paper_plant)

__version__ = "0.1.0"

__all__ = [
    "ActuatorLag", "LinearSSM", "ModeInfo", "NoOscillatoryMode", "PhysicalParams",
    "build_ssm_from_physical", "dominant_oscillatory_mode", "paper_actuator",
    "paper_physical_params", "paper_plant",
]
