"""
Spectral shapes g(omega) of a charge fluctuator with switching time tau.

A shape supplies its density and the temporal factor

    F(tau, t) = (t**2 / 2) * integral over R of g(omega) sinc^2(omega t / 2)

which multiplies the electric weights in the dephasing exponent. The base
class evaluates F by quadrature; shapes with a closed form override it.
"""

import math
from abc import ABC, abstractmethod
from typing import Dict, Union

import numpy as np
from scipy.integrate import quad

from .exceptions import InvalidArgumentError
from .models import SpectrumKind

ArrayLike = Union[float, np.ndarray]

# x = t/tau below which the Lorentzian factor uses its Taylor series
SERIES_CUTOFF = 1e-3
# end of the directly integrated interval in u = omega t / 2
_HEAD_END = 10.0 * math.pi


def _sinc2(u: float) -> float:
    return float(np.sinc(u / math.pi) ** 2)


class SpectralShape(ABC):
    """Spectral density of a random-telegraph-like fluctuator"""

    kind: SpectrumKind

    @abstractmethod
    def density(self, tau: ArrayLike, omega: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def temporal_factor(self, tau: ArrayLike, t: ArrayLike) -> ArrayLike:
        return self.temporal_factor_numeric(tau, t)

    def temporal_factor_numeric(self, tau: ArrayLike, t: ArrayLike) -> ArrayLike:
        """Quadrature of (t^2/2) * int g(w) sinc^2(w t/2) dw"""
        if np.ndim(tau) or np.ndim(t):
            return np.vectorize(self._numeric_scalar, otypes=[float])(tau, t)
        return self._numeric_scalar(float(tau), float(t))

    def _numeric_scalar(self, tau: float, t: float) -> float:
        if t < 0.0:
            raise InvalidArgumentError(f"t must be non-negative, got {t}")
        if t == 0.0:
            return 0.0

        # u = omega t / 2; g is even so F = 2 t * int_0^inf g(2u/t) sinc^2(u) du
        def g(u: float) -> float:
            return float(self.density(tau, 2.0 * u / t))

        width = t / (2.0 * tau)
        points = [p for p in (width, 10.0 * width) if p < _HEAD_END]
        head, _ = quad(
            lambda u: g(u) * _sinc2(u), 0.0, _HEAD_END,
            points=points or None, limit=500, epsabs=0.0, epsrel=1e-11,
        )

        # sin^2 u = (1 - cos 2u) / 2 on the tail
        smooth, _ = quad(
            lambda u: g(u) / (2.0 * u * u), _HEAD_END, np.inf,
            limit=500, epsabs=0.0, epsrel=1e-11,
        )
        oscillating, _ = quad(
            lambda u: g(u) / (2.0 * u * u), _HEAD_END, np.inf,
            weight="cos", wvar=2.0, epsabs=1e-14 * max(head, 1e-300),
        )
        return 2.0 * t * (head + smooth - oscillating)


class Lorentzian(SpectralShape):
    """g(w) = 2 tau / (1 + (w tau)^2), normalised to 2 pi over R"""

    kind = SpectrumKind.LORENTZIAN

    def density(self, tau: ArrayLike, omega: ArrayLike) -> ArrayLike:
        if np.any(np.asarray(tau) <= 0):
            raise InvalidArgumentError("tau must be positive")
        return 2.0 * tau / (1.0 + (omega * tau) ** 2)

    def temporal_factor(self, tau: ArrayLike, t: ArrayLike) -> ArrayLike:
        """2 pi tau (t + (exp(-t/tau) - 1) tau)"""
        tau_a = np.asarray(tau, dtype=float)
        t_a = np.asarray(t, dtype=float)
        if np.any(t_a < 0):
            raise InvalidArgumentError("t must be non-negative")
        x = t_a / tau_a
        with np.errstate(over="ignore", invalid="ignore"):
            series = x * x * (0.5 - x * (1.0 / 6.0 - x * (1.0 / 24.0 - x / 120.0)))
            exact = x + np.expm1(-x)
        core = np.where(x < SERIES_CUTOFF, series, exact)
        value = 2.0 * math.pi * tau_a * tau_a * core
        if value.ndim == 0:
            return float(value)
        return value


class SpectralShapeFactory:
    """Registry of available spectral shapes"""

    _registry: Dict[SpectrumKind, SpectralShape] = {}

    @classmethod
    def register_shape(cls, kind: SpectrumKind, shape_class) -> None:
        cls._registry[kind] = shape_class()

    @classmethod
    def get_shape(cls, kind: SpectrumKind = SpectrumKind.LORENTZIAN) -> SpectralShape:
        if kind not in cls._registry:
            raise ValueError(f"Spectral shape {kind} not registered")
        return cls._registry[kind]


SpectralShapeFactory.register_shape(SpectrumKind.LORENTZIAN, Lorentzian)
