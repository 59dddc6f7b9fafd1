"""Smart thermostat engine.

Learns a grey-box RC model of a room from temperature observations, plans
comfort/energy trade-off setpoint schedules, estimates AC energy from
temperature data alone, and watches daily health features for the slow
capacity loss of a refrigerant leak.
"""

from .errors import SmartstatError, ValidationError
from .thermal import (
    ACUnit,
    CompressorState,
    HysteresisConfig,
    NoiseModel,
    RCNetwork,
    SimulationTrace,
    ThermalState,
    ZonePreset,
    build_room_model,
    simulate,
    stable_dt,
    step,
    thermostat_transition,
)

__all__ = [
    "ACUnit",
    "CompressorState",
    "HysteresisConfig",
    "NoiseModel",
    "RCNetwork",
    "SimulationTrace",
    "SmartstatError",
    "ThermalState",
    "ValidationError",
    "ZonePreset",
    "build_room_model",
    "simulate",
    "stable_dt",
    "step",
    "thermostat_transition",
]

__version__ = "0.1.0"
