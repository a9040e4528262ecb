"""
Device model: geometry, materials, micromagnet gradients and operating point.

``load_config`` turns a lab-unit JSON document into ``DeviceParams`` holding
Gaussian-CGS values. The spring constant of the in-plane confinement is
m_eff * omega_orb**2 in x and y; the z confinement is taken as infinitely
stiff, so no z displacement term is ever built.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
from pydantic import ValidationError

from . import units
from .exceptions import ConfigError
from .models import DeviceConfig, GradientsConfig

logger = logging.getLogger(__name__)

# d/delta above which the half-space formulas are no longer trusted
NEAR_FIELD_LIMIT = 0.5

_GRADIENT_KEYS = (
    ("dBx_dx", "dBx_dy"),
    ("dBy_dx", "dBy_dy"),
    ("dBz_dx", "dBz_dy"),
)


@dataclass(frozen=True)
class GradientMatrix:
    """g[i][j] = dB_i/dx_j, i in (x, y, z), j in (x, y); G/cm"""
    g: np.ndarray

    def __post_init__(self):
        if self.g.shape != (3, 2):
            raise ValueError(f"gradient matrix must be 3x2, got {self.g.shape}")

    @classmethod
    def from_config(cls, gradients: GradientsConfig) -> "GradientMatrix":
        values = [[getattr(gradients, key) for key in row] for row in _GRADIENT_KEYS]
        return cls(np.array(values, dtype=float) * units.MILLITESLA_PER_NM)

    def to_config(self) -> GradientsConfig:
        lab = self.g / units.MILLITESLA_PER_NM
        return GradientsConfig(
            **{key: float(lab[i, j]) for i, row in enumerate(_GRADIENT_KEYS) for j, key in enumerate(row)}
        )


@dataclass(frozen=True)
class DeviceParams:
    """Device description in Gaussian-CGS units"""
    d: float  # cm
    l: float  # cm
    eps_d: float
    sigma: float  # s^-1
    m_eff: float  # g
    omega_orb: float  # rad/s
    omega_op: float  # rad/s
    temperature: float  # K
    gradients: GradientMatrix
    g_factor: float = 2.0
    charge: float = units.E_CHARGE

    @property
    def spring_constant(self) -> float:
        """k_x = k_y = m_eff omega_orb^2"""
        return self.m_eff * self.omega_orb**2

    @property
    def displacement_factor(self) -> float:
        """q / 2k: dot displacement per unit in-plane electric field"""
        return self.charge / (2.0 * self.spring_constant)

    @property
    def gyromagnetic(self) -> float:
        """q g / (2 m_e c), uses the bare electron mass"""
        return self.charge * self.g_factor / (2.0 * units.M_E * units.C_LIGHT)

    @property
    def thermal_ratio(self) -> float:
        """hbar omega_op / (2 k_B T)"""
        return units.thermal_ratio(self.omega_op, self.temperature)

    def with_sigma(self, sigma_S_per_m: float) -> "DeviceParams":
        return replace(self, sigma=units.to_internal(sigma_S_per_m, "S/m"))

    def with_gradients(self, g: np.ndarray) -> "DeviceParams":
        return replace(self, gradients=GradientMatrix(np.asarray(g, dtype=float)))

    def to_config(self) -> DeviceConfig:
        """Convert back to the lab-unit document"""
        return DeviceConfig(
            d_nm=units.from_internal(self.d, "nm"),
            l_nm=units.from_internal(self.l, "nm"),
            eps_d=self.eps_d,
            sigma_S_per_m=units.from_internal(self.sigma, "S/m"),
            m_eff_me=units.from_internal(self.m_eff, "m_e"),
            omega_orb_rad_s=self.omega_orb,
            f_op_GHz=units.from_internal(self.omega_op, "GHz"),
            temperature_mK=units.from_internal(self.temperature, "mK"),
            g_factor=self.g_factor,
            gradients_mT_per_nm=self.gradients.to_config(),
        )

    def config_hash(self) -> str:
        """sha256 of the canonical lab-unit document"""
        document = json.dumps(self.to_config().model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(document.encode("utf-8")).hexdigest()

    @classmethod
    def from_config(cls, config: DeviceConfig) -> "DeviceParams":
        return cls(
            d=units.to_internal(config.d_nm, "nm"),
            l=units.to_internal(config.l_nm, "nm"),
            eps_d=config.eps_d,
            sigma=units.to_internal(config.sigma_S_per_m, "S/m"),
            m_eff=units.to_internal(config.m_eff_me, "m_e"),
            omega_orb=config.omega_orb_rad_s,
            omega_op=units.to_internal(config.f_op_GHz, "GHz"),
            temperature=units.to_internal(config.temperature_mK, "mK"),
            gradients=GradientMatrix.from_config(config.gradients_mT_per_nm),
            g_factor=config.g_factor,
        )


@dataclass(frozen=True)
class RegimeReport:
    d_nm: float
    skin_depth_nm: float
    ratio: float
    warn: bool


def _first_error(exc: ValidationError) -> ConfigError:
    err = exc.errors()[0]
    key = ".".join(str(part) for part in err["loc"]) or None
    kind = err["type"]
    if kind == "missing":
        message = "required key is missing"
    elif kind == "extra_forbidden":
        message = "unknown key"
    else:
        message = err["msg"]
    return ConfigError(message, key=key)


def load_config(document: Union[str, Path, Dict[str, Any]]) -> DeviceParams:
    """Parse a device document (path, JSON text or dict) into internal units"""
    if isinstance(document, dict):
        raw = document
    else:
        text = str(document)
        if isinstance(document, Path) or not text.lstrip().startswith("{"):
            try:
                text = Path(document).read_text(encoding="utf-8")
            except OSError as e:
                raise ConfigError(f"cannot read device config: {e}")
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed JSON at line {e.lineno}: {e.msg}")
        if not isinstance(raw, dict):
            raise ConfigError("device config must be a JSON object")

    try:
        config = DeviceConfig(**raw)
    except ValidationError as e:
        raise _first_error(e) from e
    return DeviceParams.from_config(config)


def skin_depth(sigma: float, omega: float) -> float:
    """c / sqrt(2 pi sigma omega), sigma in Gaussian units (s^-1)"""
    return units.C_LIGHT / math.sqrt(2.0 * math.pi * sigma * omega)


def check_near_field_regime(device: DeviceParams) -> RegimeReport:
    delta = skin_depth(device.sigma, device.omega_op)
    ratio = device.d / delta
    warn = ratio > NEAR_FIELD_LIMIT
    if warn:
        logger.warning(
            "d/delta = %.3g exceeds %.2g: half-space EWJN formulas assume d << skin depth (%.4g nm)",
            ratio,
            NEAR_FIELD_LIMIT,
            units.from_internal(delta, "nm"),
        )
    return RegimeReport(
        d_nm=units.from_internal(device.d, "nm"),
        skin_depth_nm=units.from_internal(delta, "nm"),
        ratio=ratio,
        warn=warn,
    )
