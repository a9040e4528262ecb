"""
Field correlation tensors at the qubit for each noise model.

EWJN tensors are spectral densities at a given frequency. Charge-noise
models are exposed as electric weight tensors with the spectral part
factored out: multiply by g(omega) for relaxation or by the temporal
factor F(tau, t) for dephasing.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from . import units
from .device import DeviceParams
from .exceptions import InvalidArgumentError, SingularSourceError
from .models import (
    ChargeNoiseModel,
    ClusterDipoleModel,
    ClusterTrapModel,
    FieldKind,
    HyperfineModel,
    NoiseModelType,
    UniformDipoleModel,
    UniformTrapModel,
)
from .spectra import Lorentzian, SpectralShape, SpectralShapeFactory


_HALF_SPACE_PATTERN = np.diag([0.5, 0.5, 1.0])
_UT_PLUS = (9.0 * math.pi + 6.0) / 32.0
_UT_MINUS = (9.0 * math.pi - 6.0) / 32.0


@dataclass(frozen=True)
class CorrelationTensor:
    """<F_i F_j>_omega for one field at one frequency"""
    entries: np.ndarray
    field_kind: FieldKind
    frequency: float


@dataclass(frozen=True)
class InPlaneWeights:
    """In-plane electric weights of a uniform charge distribution"""
    s_xx: float
    s_yy: float
    s_xy: float = 0.0

    def as_matrix(self) -> np.ndarray:
        return np.array(
            [[self.s_xx, self.s_xy, 0.0], [self.s_xy, self.s_yy, 0.0], [0.0, 0.0, 0.0]]
        )


_LORENTZIAN = Lorentzian()


def lorentzian_spectrum(tau: float, omega: float) -> float:
    return _LORENTZIAN.density(tau, omega)


def temporal_factor(tau: float, t: float) -> float:
    return _LORENTZIAN.temporal_factor(tau, t)


def _thermal_coth(device: DeviceParams, omega: float) -> float:
    if omega <= 0:
        raise InvalidArgumentError(f"omega must be positive, got {omega}")
    return units.coth(units.thermal_ratio(omega, device.temperature))


def ewjn_electric_tensor(device: DeviceParams, omega: float) -> CorrelationTensor:
    """diag(1/2, 1/2, 1) * hbar w eps_d / (8 pi sigma d^3) * coth(hbar w / 2kT)"""
    ezz = (
        units.HBAR * omega * device.eps_d / (8.0 * math.pi * device.sigma * device.d**3)
    ) * _thermal_coth(device, omega)
    return CorrelationTensor(_HALF_SPACE_PATTERN * ezz, FieldKind.ELECTRIC, omega)


def ewjn_magnetic_tensor(device: DeviceParams, omega: float) -> CorrelationTensor:
    """diag(1/2, 1/2, 1) * pi hbar sigma w / (2 c^2 d) * coth(hbar w / 2kT)"""
    bzz = (
        math.pi * units.HBAR * device.sigma * omega / (2.0 * units.C_LIGHT**2 * device.d)
    ) * _thermal_coth(device, omega)
    return CorrelationTensor(_HALF_SPACE_PATTERN * bzz, FieldKind.MAGNETIC, omega)


def charge_uniform_efield_weights(
    model: ChargeNoiseModel, device: DeviceParams
) -> InPlaneWeights:
    """In-plane weights {S_xx, S_yy} of the UD or UT model"""
    p0_sq = units.to_internal(model.p0_Cm, "C m") ** 2
    if isinstance(model, UniformDipoleModel):
        if device.l > device.d:
            raise InvalidArgumentError("oxide thickness l must not exceed d")
        rho = model.rho_v_per_cm3 if model.rho_v_per_cm3 is not None else 1.0
        s = math.pi * rho * p0_sq / 12.0 * (1.0 / device.l**3 - 1.0 / device.d**3)
        return InPlaneWeights(s_xx=s, s_yy=s)
    if isinstance(model, UniformTrapModel):
        rho = model.rho_a_per_cm2 if model.rho_a_per_cm2 is not None else 1.0
        base = rho * p0_sq / device.d**4
        # the asymmetric angular domain leaves S_xy at zero
        return InPlaneWeights(s_xx=_UT_PLUS * base, s_yy=_UT_MINUS * base)
    raise InvalidArgumentError(f"{model.type} is not a uniform charge model")


def cluster_efield_weights(model: ChargeNoiseModel) -> np.ndarray:
    """Full 3x3 electric weights of a localized cluster, spectral part removed"""
    if not isinstance(model, (ClusterDipoleModel, ClusterTrapModel)):
        raise InvalidArgumentError(f"{model.type} is not a cluster model")
    # displacement from the cluster to the qubit
    r = -np.asarray(model.position_nm, dtype=float) * units.NANOMETER
    r2 = float(r @ r)
    if r2 == 0.0:
        raise SingularSourceError("cluster sits on the qubit (|R'| = 0)")
    p0_sq = units.to_internal(model.p0_Cm, "C m") ** 2

    if isinstance(model, ClusterDipoleModel):
        return (p0_sq / 3.0) * (3.0 * np.outer(r, r) + r2 * np.eye(3)) / r2**4
    # 9 Rz^2 Ri Rj - 3 Rz Rj R^2 d_iz - 3 Rz Ri R^2 d_jz + R^4 d_iz d_jz = v_i v_j
    v = 3.0 * r[2] * r - r2 * np.array([0.0, 0.0, 1.0])
    return p0_sq * np.outer(v, v) / r2**5


def cluster_efield_tensor(
    model: ChargeNoiseModel, omega: float, spectrum: Optional[SpectralShape] = None
) -> CorrelationTensor:
    spectrum = spectrum or SpectralShapeFactory.get_shape()
    entries = cluster_efield_weights(model) * spectrum.density(model.tau_s, omega)
    return CorrelationTensor(entries, FieldKind.ELECTRIC, omega)


def hyperfine_rate(model: Optional[HyperfineModel] = None) -> float:
    """Isotropic hyperfine dephasing rate, s^-1"""
    return (model or HyperfineModel()).rate_per_s


def derive_hyperfine_rate(t2_measured: float, t2_other: float) -> float:
    """Hyperfine share of a measured rate once the other channel is removed"""
    return 1.0 / t2_measured - 1.0 / t2_other


@dataclass
class NoiseSourceBlock:
    """Base class for charge-noise source geometries"""
    model_type: NoiseModelType
    strength_parameter: str

    def electric_weights(self, model: Any, device: DeviceParams) -> np.ndarray:
        raise NotImplementedError

    def strength(self, model: Any) -> float:
        value = getattr(model, self.strength_parameter)
        return 1.0 if value is None else value

    def scale_strength(self, model: Any, scale: float) -> Any:
        """Model whose dephasing exponent is ``scale`` times larger"""
        return model.model_copy(
            update={self.strength_parameter: self.strength(model) * scale}
        )


class UniformDipoleBlock(NoiseSourceBlock):
    def __init__(self):
        super().__init__(NoiseModelType.UNIFORM_DIPOLE, "rho_v_per_cm3")

    def electric_weights(self, model: UniformDipoleModel, device: DeviceParams) -> np.ndarray:
        return charge_uniform_efield_weights(model, device).as_matrix()


class UniformTrapBlock(NoiseSourceBlock):
    def __init__(self):
        super().__init__(NoiseModelType.UNIFORM_TRAP, "rho_a_per_cm2")

    def electric_weights(self, model: UniformTrapModel, device: DeviceParams) -> np.ndarray:
        return charge_uniform_efield_weights(model, device).as_matrix()


class _ClusterBlock(NoiseSourceBlock):
    def electric_weights(self, model: Any, device: DeviceParams) -> np.ndarray:
        return cluster_efield_weights(model)

    def scale_strength(self, model: Any, scale: float) -> Any:
        # weights go as p0^2
        return model.model_copy(update={"p0_Cm": model.p0_Cm * math.sqrt(scale)})


class ClusterDipoleBlock(_ClusterBlock):
    def __init__(self):
        super().__init__(NoiseModelType.CLUSTER_DIPOLE, "p0_Cm")


class ClusterTrapBlock(_ClusterBlock):
    def __init__(self):
        super().__init__(NoiseModelType.CLUSTER_TRAP, "p0_Cm")


class NoiseSourceFactory:
    """Registry of charge-noise source blocks"""

    _registry: Dict[NoiseModelType, NoiseSourceBlock] = {}

    @classmethod
    def register_block(cls, model_type: NoiseModelType, block_class) -> None:
        cls._registry[model_type] = block_class()

    @classmethod
    def get_block(cls, model_type) -> NoiseSourceBlock:
        model_type = NoiseModelType(model_type)
        if model_type not in cls._registry:
            raise ValueError(f"Noise model {model_type} has no charge-noise block")
        return cls._registry[model_type]

    @classmethod
    def electric_weights(cls, model: ChargeNoiseModel, device: DeviceParams) -> np.ndarray:
        return cls.get_block(model.type).electric_weights(model, device)


NoiseSourceFactory.register_block(NoiseModelType.UNIFORM_DIPOLE, UniformDipoleBlock)
NoiseSourceFactory.register_block(NoiseModelType.UNIFORM_TRAP, UniformTrapBlock)
NoiseSourceFactory.register_block(NoiseModelType.CLUSTER_DIPOLE, ClusterDipoleBlock)
NoiseSourceFactory.register_block(NoiseModelType.CLUSTER_TRAP, ClusterTrapBlock)
