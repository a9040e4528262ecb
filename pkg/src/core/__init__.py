"""
Core components: device model, noise sources, coherence times and anisotropy maps
"""

from src.core.anisotropy import (
    AnisotropyMap,
    calibrate,
    calibrate_models,
    census,
    euler_check,
    extremal_ratio,
    sweep,
)
from src.core.device import DeviceParams, load_config
from src.core.exceptions import SimulatorError
from src.core.geometry import FieldDirection, direction_from_angles

__all__ = [
    "AnisotropyMap",
    "DeviceParams",
    "FieldDirection",
    "SimulatorError",
    "calibrate",
    "calibrate_models",
    "census",
    "direction_from_angles",
    "euler_check",
    "extremal_ratio",
    "load_config",
    "sweep",
]
