"""Three-rotor wind turbine: structural model, local power tracking and central load mitigation."""
from __future__ import annotations

from .aero import Aero, AeroConstants, AeroMaps, default_maps
from .config import ConfigError, load_config, shipped_config
from .control_central import CentralGains, MitigationController, dispatch
from .control_local import GainSchedule, LocalController, WindObserver, synthesize_gains
from .dynamics import RotorModel, RotorUnitParams, equilibrium_find
from .reduced_model import ReducedModel, SchedulingBox, sector_decompose
from .simkit import SimConfig, SimTrace, WindScenario, run_scenario
from .tower import TowerParams

__version__ = "0.1.0"

__all__ = [
    "Aero",
    "AeroConstants",
    "AeroMaps",
    "CentralGains",
    "ConfigError",
    "GainSchedule",
    "LocalController",
    "MitigationController",
    "ReducedModel",
    "RotorModel",
    "RotorUnitParams",
    "SchedulingBox",
    "SimConfig",
    "SimTrace",
    "TowerParams",
    "WindObserver",
    "WindScenario",
    "default_maps",
    "dispatch",
    "equilibrium_find",
    "load_config",
    "run_scenario",
    "sector_decompose",
    "shipped_config",
    "synthesize_gains",
]
