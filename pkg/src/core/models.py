import math
from enum import Enum
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

# rms dipole moment: elementary charge times the size of an aluminium atom
DEFAULT_P0_CM = 2.0e-29
# placeholder switching time; every tau-dependent output records the value used
DEFAULT_TAU_S = 1.0e-6
# (1.83 us)^-1 - (20.4 us)^-1
DEFAULT_HYPERFINE_RATE = 1.0 / 2.01e-6


class Quantity(str, Enum):
    """Decoherence time shown on a map"""
    T1 = "t1"
    T2 = "t2"


class WeightKind(str, Enum):
    TRANSVERSE = "transverse"
    LONGITUDINAL = "longitudinal"


class FieldKind(str, Enum):
    ELECTRIC = "electric"
    MAGNETIC = "magnetic"


class NoiseModelType(str, Enum):
    """Noise source geometries"""
    UNIFORM_DIPOLE = "UD"
    UNIFORM_TRAP = "UT"
    CLUSTER_DIPOLE = "cluster_dipole"
    CLUSTER_TRAP = "cluster_trap"
    EWJN = "EWJN"
    HYPERFINE = "hyperfine"


class SpectrumKind(str, Enum):
    LORENTZIAN = "lorentzian"


class ExportFormat(str, Enum):
    CSV = "csv"
    JSON = "json"
    PPM = "ppm"


class GradientsConfig(BaseModel):
    """Micromagnet gradients dB_i/dx_j at the qubit, mT/nm"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    dBx_dx: float = Field(..., description="dBx/dx")
    dBy_dx: float = Field(..., description="dBy/dx")
    dBz_dx: float = Field(..., description="dBz/dx")
    dBx_dy: float = Field(..., description="dBx/dy")
    dBy_dy: float = Field(..., description="dBy/dy")
    dBz_dy: float = Field(..., description="dBz/dy")


class DeviceConfig(BaseModel):
    """Device description in lab units, as stored in the JSON config"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    d_nm: float = Field(..., gt=0, description="Qubit to gate distance")
    l_nm: float = Field(..., gt=0, description="Oxide layer thickness")
    eps_d: float = Field(..., gt=0, description="Relative dielectric constant")
    sigma_S_per_m: float = Field(..., gt=0, description="Gate conductivity")
    m_eff_me: float = Field(..., gt=0, description="Transverse effective mass")
    omega_orb_rad_s: float = Field(..., gt=0, description="Lowest orbital frequency")
    f_op_GHz: float = Field(..., gt=0, description="Qubit operating frequency")
    temperature_mK: float = Field(..., gt=0, description="Sample temperature")
    g_factor: float = Field(2.0, gt=0, description="Electron g-factor")
    gradients_mT_per_nm: GradientsConfig = Field(..., description="Micromagnet gradients")


class _ChargeModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    p0_Cm: float = Field(DEFAULT_P0_CM, gt=0, description="rms dipole moment")
    tau_s: float = Field(DEFAULT_TAU_S, gt=0, description="Switching time")
    fit: bool = Field(False, description="Strength is fitted to the reference T2")


class UniformDipoleModel(_ChargeModel):
    """Random dipoles spread uniformly through the oxide layer"""
    type: Literal["UD"] = "UD"
    rho_v_per_cm3: Optional[float] = Field(None, gt=0, description="Volume density")

    @model_validator(mode="after")
    def _density_or_fit(self):
        if self.rho_v_per_cm3 is None and not self.fit:
            raise ValueError("rho_v_per_cm3 is required unless fit is true")
        return self


class UniformTrapModel(_ChargeModel):
    """Interface traps spread uniformly over the gate plane"""
    type: Literal["UT"] = "UT"
    rho_a_per_cm2: Optional[float] = Field(None, gt=0, description="Areal density")

    @model_validator(mode="after")
    def _density_or_fit(self):
        if self.rho_a_per_cm2 is None and not self.fit:
            raise ValueError("rho_a_per_cm2 is required unless fit is true")
        return self


class ClusterDipoleModel(_ChargeModel):
    """Localized cluster of random dipoles"""
    type: Literal["cluster_dipole"] = "cluster_dipole"
    position_nm: Tuple[float, float, float] = Field(..., description="Position relative to the qubit")

    @model_validator(mode="after")
    def _off_qubit(self):
        if math.hypot(*self.position_nm) == 0.0:
            raise ValueError("position_nm must not coincide with the qubit")
        return self


class ClusterTrapModel(_ChargeModel):
    """Localized cluster of interface traps above the qubit"""
    type: Literal["cluster_trap"] = "cluster_trap"
    position_nm: Tuple[float, float, float] = Field(..., description="Position relative to the qubit")

    @model_validator(mode="after")
    def _above_qubit(self):
        if self.position_nm[2] <= 0.0:
            raise ValueError("position_nm z must be positive (trap at the gate interface)")
        return self


class EWJNModel(BaseModel):
    """Evanescent-wave Johnson noise from the gate half-space"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    type: Literal["EWJN"] = "EWJN"
    constant_alpha: bool = Field(False, description="Use the angle-independent direct term")


class HyperfineModel(BaseModel):
    """Isotropic nuclear-bath dephasing rate"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    type: Literal["hyperfine"] = "hyperfine"
    rate_per_s: float = Field(DEFAULT_HYPERFINE_RATE, ge=0, description="Dephasing rate")


ChargeNoiseModel = Union[UniformDipoleModel, UniformTrapModel, ClusterDipoleModel, ClusterTrapModel]

NoiseModel = Annotated[
    Union[
        UniformDipoleModel,
        UniformTrapModel,
        ClusterDipoleModel,
        ClusterTrapModel,
        EWJNModel,
        HyperfineModel,
    ],
    Field(discriminator="type"),
]

CHARGE_MODEL_TYPES = (UniformDipoleModel, UniformTrapModel, ClusterDipoleModel, ClusterTrapModel)


def is_charge_model(model: Any) -> bool:
    return isinstance(model, CHARGE_MODEL_TYPES)


def model_label(model: Any) -> str:
    """Short human label, e.g. UD or CT(37,0,137)"""
    if isinstance(model, ClusterDipoleModel):
        return "CD({:g},{:g},{:g})".format(*model.position_nm)
    if isinstance(model, ClusterTrapModel):
        return "CT({:g},{:g},{:g})".format(*model.position_nm)
    return model.type


class CalibrationRecord(BaseModel):
    """Outcome of fitting one model strength to a reference T2"""
    model: str = Field(..., description="Model label")
    parameter: str = Field(..., description="Fitted parameter name")
    initial_value: float
    fitted_value: float
    scale: float = Field(..., description="Multiplier applied to the dephasing exponent")
    reference_theta_rad: float
    reference_phi_rad: float
    target_t2_s: float
    charge_tphi_s: float = Field(..., description="Charge-only dephasing time at the reference")
    background_rate_per_s: float = Field(..., description="Hyperfine plus EWJN dephasing rate")
    fixed_charge_gamma: float = Field(0.0, description="Gamma(T*) of the charge models that are not fitted")
    hyperfine_share: float = Field(..., description="Fraction of the target rate due to hyperfine")
    tau_s: float


class CriticalPointCensus(BaseModel):
    """Counts of critical points of a map on the sphere"""
    n_max: int = 0
    n_min: int = 0
    n_saddle: int = 0
    degenerate: bool = False
    flagged_cells: List[Tuple[int, int]] = Field(default_factory=list)
    reasons: List[str] = Field(default_factory=list)
    maxima: List[Tuple[float, float]] = Field(default_factory=list, description="(theta, phi) per maximum")
    minima: List[Tuple[float, float]] = Field(default_factory=list, description="(theta, phi) per minimum")
    saddles: List[Tuple[float, float]] = Field(default_factory=list, description="(theta, phi) per saddle")

    @property
    def counts(self) -> Tuple[int, int, int]:
        return (self.n_max, self.n_min, self.n_saddle)


class Resolution(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_theta: int = Field(181, ge=5, description="Polar grid points, poles included")
    n_phi: int = Field(360, ge=8, description="Azimuthal grid points over [0, 2pi)")

    @classmethod
    def parse(cls, text: str) -> "Resolution":
        """Parse the NxM command-line form"""
        try:
            n_theta, n_phi = (int(part) for part in text.lower().split("x"))
        except ValueError:
            raise ValueError(f"resolution must look like 181x360, got '{text}'")
        return cls(n_theta=n_theta, n_phi=n_phi)

    def __str__(self) -> str:
        return f"{self.n_theta}x{self.n_phi}"


class ReferenceMeasurement(BaseModel):
    model_config = ConfigDict(extra="forbid")

    theta_rad: float = Field(math.pi / 2, allow_inf_nan=False, description="Reference field polar angle")
    phi_rad: float = Field(0.0, allow_inf_nan=False, description="Reference field azimuthal angle")
    t2_s: float = Field(..., gt=0, description="Measured T2 at the reference direction")


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: str = Field("outputs", description="Directory receiving map files")
    formats: List[ExportFormat] = Field(default_factory=lambda: [ExportFormat.CSV, ExportFormat.JSON])


class RunConfig(BaseModel):
    """Run description: device, noise models and what to compute"""
    model_config = ConfigDict(extra="forbid")

    device: str = Field(..., description="Path to the device JSON")
    models: List[NoiseModel] = Field(..., min_length=1)
    quantity: Quantity = Quantity.T2
    resolution: Resolution = Field(default_factory=Resolution)
    reference: Optional[ReferenceMeasurement] = None
    include_t1_in_t2: bool = False
    tau_s: Optional[float] = Field(None, gt=0, description="Switching time override for charge models")
    sigma_S_per_m: Optional[float] = Field(None, gt=0, description="Conductivity override")
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def _reference_when_fitting(self):
        if any(getattr(m, "fit", False) for m in self.models) and self.reference is None:
            raise ValueError("reference is required when any model has fit=true")
        return self


class AnchorCheck(BaseModel):
    """One row of the reproduction summary"""
    name: str
    reference: str
    computed: str
    tolerance: str = ""
    passed: bool
    informational: bool = False
    note: str = ""


def dump_models(models: List[Any]) -> List[Dict[str, Any]]:
    return [m.model_dump(mode="json") for m in models]
