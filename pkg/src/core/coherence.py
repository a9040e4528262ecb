"""
Relaxation and dephasing from noise correlation tensors.

Electric noise moves the dot in the micromagnet gradient, which the spin sees
as an effective magnetic field. Contractions with the transverse weight give
1/T1 at the operating frequency; contractions with the longitudinal weight
and the temporal factor give the dephasing exponent Gamma(t), whose root
Gamma(T_phi) = 1 is found by bracket doubling and bisection.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .device import DeviceParams
from .exceptions import InvalidArgumentError, SolverError
from .geometry import (
    FieldDirection,
    longitudinal_forms,
    transverse_forms,
    transverse_weight,
)
from .models import EWJNModel, HyperfineModel, is_charge_model, model_label
from .noise_sources import (
    CorrelationTensor,
    NoiseSourceFactory,
    ewjn_electric_tensor,
    ewjn_magnetic_tensor,
)
from .spectra import SpectralShape, SpectralShapeFactory
from . import units

logger = logging.getLogger(__name__)

NO_DECAY = math.inf

MAX_DOUBLINGS = 200
MAX_BISECTIONS = 200
BISECTION_RTOL = 1e-13
# the bracket search starts at this fraction of the shortest switching time
BRACKET_START = 1e-2

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class EffectiveTensor:
    """Magnetic-field correlations felt by the spin"""
    entries: np.ndarray
    provenance: Tuple[str, ...] = ()
    context: str = ""

    def __add__(self, other: "EffectiveTensor") -> "EffectiveTensor":
        return EffectiveTensor(
            self.entries + other.entries,
            self.provenance + other.provenance,
            self.context or other.context,
        )


def _entries(tensor: Any) -> np.ndarray:
    if isinstance(tensor, (CorrelationTensor, EffectiveTensor)):
        return tensor.entries
    return np.asarray(tensor, dtype=float)


def effective_from_electric(
    electric: Union[CorrelationTensor, np.ndarray],
    device: DeviceParams,
    provenance: Tuple[str, ...] = (),
) -> EffectiveTensor:
    """
    <B_i B_j> = sum_{m,n in x,y} (q^2 / 4 k_m k_n) dB_i/dx_m dB_j/dx_n <E_m E_n>.

    z rows of the electric tensor are ignored since the dot cannot move in z.
    """
    e_xy = _entries(electric)[:2, :2]
    g = device.gradients.g
    w = device.displacement_factor**2 * (g @ e_xy @ g.T)
    context = ""
    if isinstance(electric, CorrelationTensor):
        context = f"omega={electric.frequency:.6g}"
    return EffectiveTensor(0.5 * (w + w.T), provenance, context)


def _relaxation_prefactor(device: DeviceParams) -> float:
    """(q g / 4 m_e c)^2"""
    return (device.gyromagnetic / 2.0) ** 2


def _dephasing_prefactor(device: DeviceParams) -> float:
    """(q g / 2 m_e c)^2"""
    return device.gyromagnetic**2


def _rate_to_time(rate: float) -> float:
    return 1.0 / rate if rate > 0.0 else NO_DECAY


def t1_from_tensor(
    effective: Union[EffectiveTensor, np.ndarray], direction: FieldDirection, device: DeviceParams
) -> float:
    rate = _relaxation_prefactor(device) * transverse_weight(direction).contract(_entries(effective))
    return _rate_to_time(rate)


def ewjn_effective_tensor(device: DeviceParams, omega: Optional[float] = None) -> EffectiveTensor:
    """Direct magnetic EWJN plus the gradient-converted electric EWJN"""
    omega = device.omega_op if omega is None else omega
    magnetic = ewjn_magnetic_tensor(device, omega)
    direct = EffectiveTensor(magnetic.entries, ("EWJN magnetic",), f"omega={omega:.6g}")
    return direct + effective_from_electric(
        ewjn_electric_tensor(device, omega), device, ("EWJN electric",)
    )


def _ewjn_t1_rates(
    vectors: np.ndarray, device: DeviceParams, constant_alpha: bool = False
) -> np.ndarray:
    omega = device.omega_op
    magnetic = ewjn_magnetic_tensor(device, omega).entries
    converted = effective_from_electric(ewjn_electric_tensor(device, omega), device).entries
    rates = transverse_forms(vectors, converted)
    if constant_alpha:
        rates = rates + magnetic[2, 2]
    else:
        rates = rates + transverse_forms(vectors, magnetic)
    return _relaxation_prefactor(device) * rates


def ewjn_t1(
    device: DeviceParams,
    direction: FieldDirection,
    sigma_S_per_m: Optional[float] = None,
    constant_alpha: bool = False,
) -> float:
    """
    T1 from evanescent-wave Johnson noise.

    The direct term grows with sigma and the converted electric term falls
    as 1/sigma. With ``constant_alpha`` the direct term is replaced by its
    angle-independent value (qg/4m_ec)^2 <BzBz>.
    """
    if sigma_S_per_m is not None:
        device = device.with_sigma(sigma_S_per_m)
    rate = _ewjn_t1_rates(direction.unit_vector()[None, :], device, constant_alpha)[0]
    return _rate_to_time(float(rate))


def _ewjn_dephasing_rates(vectors: np.ndarray, device: DeviceParams) -> np.ndarray:
    x = device.thermal_ratio
    # 2 pi k T / (hbar w coth x): the omega -> 0 classical limit of the spectrum
    low_frequency = 2.0 * math.pi * units.K_B * device.temperature / (
        units.HBAR * device.omega_op * units.coth(x)
    )
    s = ewjn_effective_tensor(device).entries
    return _dephasing_prefactor(device) * longitudinal_forms(vectors, s) * low_frequency


def ewjn_dephasing_rate(device: DeviceParams, direction: FieldDirection) -> float:
    return float(_ewjn_dephasing_rates(direction.unit_vector()[None, :], device)[0])


def charge_models(models: Iterable[Any]) -> List[Any]:
    return [m for m in models if is_charge_model(m)]


def background_rates(
    vectors: np.ndarray, models: Sequence[Any], device: DeviceParams
) -> np.ndarray:
    """Hyperfine plus EWJN dephasing rate for every direction"""
    rates = np.zeros(vectors.shape[:-1])
    for model in models:
        if isinstance(model, HyperfineModel):
            rates = rates + model.rate_per_s
        elif isinstance(model, EWJNModel):
            rates = rates + _ewjn_dephasing_rates(vectors, device)
    return rates


def dephasing_coefficients(
    vectors: np.ndarray, models: Sequence[Any], device: DeviceParams
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-direction, per-model coefficients c_k with Gamma(t) = sum_k c_k F(tau_k, t).

    Returns (coefficients of shape (N, K), taus of shape (K,)).
    """
    charge = charge_models(models)
    vectors = np.atleast_2d(vectors)
    coefficients = np.zeros((vectors.shape[0], len(charge)))
    prefactor = _dephasing_prefactor(device)
    for k, model in enumerate(charge):
        w = effective_from_electric(NoiseSourceFactory.electric_weights(model, device), device)
        coefficients[:, k] = prefactor * longitudinal_forms(vectors, w.entries)
    # rounding can leave null directions slightly negative
    np.clip(coefficients, 0.0, None, out=coefficients)
    taus = np.array([m.tau_s for m in charge], dtype=float)
    return coefficients, taus


def _gamma_rows(
    t: np.ndarray, coefficients: np.ndarray, taus: np.ndarray, spectrum: SpectralShape
) -> np.ndarray:
    factors = spectrum.temporal_factor(taus[None, :], t[:, None])
    return np.sum(coefficients * factors, axis=1)


def gamma(
    t: float,
    direction: FieldDirection,
    models: Sequence[Any],
    device: DeviceParams,
    spectrum: Optional[SpectralShape] = None,
) -> float:
    """
    Dephasing exponent Gamma(t) of the charge-noise models.

    Hyperfine and EWJN entries are skipped; they enter T2 as rates.
    """
    if t < 0:
        raise InvalidArgumentError(f"t must be non-negative, got {t}")
    spectrum = spectrum or SpectralShapeFactory.get_shape()
    coefficients, taus = dephasing_coefficients(direction.unit_vector()[None, :], models, device)
    if taus.size == 0:
        return 0.0
    return float(_gamma_rows(np.array([float(t)]), coefficients, taus, spectrum)[0])


def solve_dephasing_times(
    coefficients: np.ndarray,
    taus: np.ndarray,
    spectrum: Optional[SpectralShape] = None,
    grid_points: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Solve Gamma(T) = 1 for every row of ``coefficients``.

    Rows with no coupling return NO_DECAY. Gamma is nondecreasing in t, so a
    doubled bracket followed by bisection always converges once bracketed.
    """
    spectrum = spectrum or SpectralShapeFactory.get_shape()
    n_points = coefficients.shape[0]
    result = np.full(n_points, NO_DECAY)
    active = np.flatnonzero(np.any(coefficients > 0.0, axis=1))
    if active.size == 0:
        return result

    c = coefficients[active]
    t0 = BRACKET_START * float(np.min(taus))
    hi = np.full(active.size, t0)
    values = _gamma_rows(hi, c, taus, spectrum)
    for _ in range(MAX_DOUBLINGS):
        short = values < 1.0
        if not short.any():
            break
        hi[short] *= 2.0
        values[short] = _gamma_rows(hi[short], c[short], taus, spectrum)

    unbracketed = np.flatnonzero(values < 1.0)
    if unbracketed.size:
        index = int(active[unbracketed[0]])
        point = None
        if grid_points is not None:
            point = (float(grid_points[index, 0]), float(grid_points[index, 1]))
        raise SolverError(
            f"Gamma(t) = 1 not bracketed after {MAX_DOUBLINGS} doublings", grid_point=point
        )

    lo = np.where(hi > t0, 0.5 * hi, 0.0)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        below = _gamma_rows(mid, c, taus, spectrum) < 1.0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= BISECTION_RTOL * hi):
            break

    result[active] = 0.5 * (lo + hi)
    logger.debug("solved %d dephasing times, %d without coupling", active.size, n_points - active.size)
    return result


def dephasing_time(
    direction: FieldDirection,
    models: Sequence[Any],
    device: DeviceParams,
    spectrum: Optional[SpectralShape] = None,
) -> float:
    """Charge-only T_phi with Gamma(T_phi) = 1"""
    coefficients, taus = dephasing_coefficients(direction.unit_vector()[None, :], models, device)
    if taus.size == 0:
        return NO_DECAY
    return float(solve_dephasing_times(coefficients, taus, spectrum)[0])


def combine_t2(
    charge_tphi: ArrayLike,
    hyperfine_rate: ArrayLike = 0.0,
    t1: Optional[ArrayLike] = None,
    extra_rate: ArrayLike = 0.0,
) -> ArrayLike:
    """1/T2 = 1/T_phi + hyperfine rate (+ extra dephasing rate) (+ 1/2T1)"""
    with np.errstate(divide="ignore"):
        rate = 1.0 / np.asarray(charge_tphi, dtype=float) + hyperfine_rate + extra_rate
        if t1 is not None:
            rate = rate + 1.0 / (2.0 * np.asarray(t1, dtype=float))
        t2 = np.where(rate > 0.0, 1.0 / np.where(rate > 0.0, rate, 1.0), NO_DECAY)
    if t2.ndim == 0:
        return float(t2)
    return t2


def charge_t1_rates(
    vectors: np.ndarray,
    models: Sequence[Any],
    device: DeviceParams,
    spectrum: Optional[SpectralShape] = None,
) -> np.ndarray:
    spectrum = spectrum or SpectralShapeFactory.get_shape()
    rates = np.zeros(np.atleast_2d(vectors).shape[0])
    for model in charge_models(models):
        w = effective_from_electric(NoiseSourceFactory.electric_weights(model, device), device)
        g_op = spectrum.density(model.tau_s, device.omega_op)
        rates = rates + transverse_forms(np.atleast_2d(vectors), w.entries) * g_op
    return _relaxation_prefactor(device) * rates


def charge_t1(
    direction: FieldDirection,
    model: Any,
    device: DeviceParams,
    spectrum: Optional[SpectralShape] = None,
) -> float:
    """T1 of one charge-noise model, spectral weight g(omega_op)"""
    if not is_charge_model(model):
        raise InvalidArgumentError(f"{model_label(model)} is not a charge-noise model")
    rate = charge_t1_rates(direction.unit_vector()[None, :], [model], device, spectrum)[0]
    return _rate_to_time(float(rate))


def total_t1_rates(
    vectors: np.ndarray,
    models: Sequence[Any],
    device: DeviceParams,
    spectrum: Optional[SpectralShape] = None,
) -> np.ndarray:
    """Sum of relaxation rates over every model that relaxes the spin"""
    vectors = np.atleast_2d(vectors)
    rates = charge_t1_rates(vectors, models, device, spectrum)
    for model in models:
        if isinstance(model, EWJNModel):
            rates = rates + _ewjn_t1_rates(vectors, device, model.constant_alpha)
    return rates

