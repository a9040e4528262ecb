"""
Physical constants and lab-unit conversions.

Every formula in the simulator is evaluated in Gaussian-CGS units. Config
documents use lab units (nm, mT/nm, S/m, mK, GHz, C·m); the scale table
below maps each of them onto the internal system.
"""

import math
from typing import Dict

from scipy import constants as const

# Gaussian-CGS constants
HBAR = const.hbar * 1e7  # erg s
K_B = const.k * 1e7  # erg / K
C_LIGHT = const.c * 1e2  # cm / s
M_E = const.m_e * 1e3  # g
E_CHARGE = const.e * const.c * 10.0  # statC

# 1/(4 pi eps0) expressed in s^-1 per (S/m)
SIEMENS_PER_M = 1.0 / (4.0 * math.pi * const.epsilon_0)
# 1 C m in statC cm
COULOMB_METER = const.c * 1e3
# 1 mT/nm in G/cm
MILLITESLA_PER_NM = 1e8

NANOMETER = 1e-7
MICROSECOND = 1e-6

_SCALE: Dict[str, float] = {
    "nm": NANOMETER,
    "cm": 1.0,
    "S/m": SIEMENS_PER_M,
    "mK": 1e-3,
    "K": 1.0,
    "GHz": 2.0 * math.pi * 1e9,
    "rad/s": 1.0,
    "mT/nm": MILLITESLA_PER_NM,
    "C m": COULOMB_METER,
    "m_e": M_E,
    "cm^-3": 1.0,
    "cm^-2": 1.0,
    "s": 1.0,
    "us": MICROSECOND,
}


def scale_factor(unit: str) -> float:
    """Multiplier taking a value in ``unit`` to internal units"""
    try:
        return _SCALE[unit]
    except KeyError:
        raise KeyError(f"Unknown unit '{unit}'. Known units: {', '.join(_SCALE)}")


def to_internal(value: float, unit: str) -> float:
    return value * scale_factor(unit)


def from_internal(value: float, unit: str) -> float:
    return value / scale_factor(unit)


def thermal_ratio(omega: float, temperature: float) -> float:
    """hbar omega / (2 k_B T)"""
    return HBAR * omega / (2.0 * K_B * temperature)


def coth(x: float) -> float:
    return 1.0 / math.tanh(x)
