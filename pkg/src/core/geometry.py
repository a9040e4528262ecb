"""
Field-direction geometry.

The transverse weight contracts a noise tensor into the relaxation rate and
the longitudinal weight into the dephasing exponent. Both are returned as
the explicit matrices of the angular expansion; the tests check them
against I - n n^T and n n^T.
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError
from .models import WeightKind

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class FieldDirection:
    """Applied-field orientation; theta in [0, pi], phi in [0, 2pi)"""
    theta: float
    phi: float

    def unit_vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array(
            [st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)]
        )

    def antipode(self) -> "FieldDirection":
        return direction_from_angles(math.pi - self.theta, self.phi + math.pi)


@dataclass(frozen=True)
class WeightMatrix:
    entries: np.ndarray
    kind: WeightKind

    def contract(self, tensor: np.ndarray) -> float:
        """sum_ij M_ij S_ij"""
        return float(np.einsum("ij,ij->", self.entries, tensor))


def direction_from_angles(theta: float, phi: float) -> FieldDirection:
    """Fold arbitrary finite angles into the canonical ranges"""
    if not (math.isfinite(theta) and math.isfinite(phi)):
        raise InvalidArgumentError(f"angles must be finite, got theta={theta}, phi={phi}")

    theta = math.fmod(theta, TWO_PI)
    if theta < 0.0:
        theta += TWO_PI
    if theta > math.pi:
        # same unit vector: sin flips sign, the phi shift flips it back
        theta = TWO_PI - theta
        phi += math.pi

    phi = math.fmod(phi, TWO_PI)
    if phi < 0.0:
        phi += TWO_PI
    if phi >= TWO_PI:
        phi = 0.0
    return FieldDirection(theta=theta, phi=phi)


def transverse_weight(direction: FieldDirection) -> WeightMatrix:
    st, ct = math.sin(direction.theta), math.cos(direction.theta)
    sp, cp = math.sin(direction.phi), math.cos(direction.phi)
    entries = np.array(
        [
            [1.0 - st**2 * cp**2, -(st**2) * sp * cp, -st * ct * cp],
            [-(st**2) * sp * cp, 1.0 - st**2 * sp**2, -st * ct * sp],
            [-st * ct * cp, -st * ct * sp, st**2],
        ]
    )
    return WeightMatrix(entries=entries, kind=WeightKind.TRANSVERSE)


def longitudinal_weight(direction: FieldDirection) -> WeightMatrix:
    st, ct = math.sin(direction.theta), math.cos(direction.theta)
    sp, cp = math.sin(direction.phi), math.cos(direction.phi)
    entries = np.array(
        [
            [st**2 * cp**2, st**2 * sp * cp, st * ct * cp],
            [st**2 * sp * cp, st**2 * sp**2, st * ct * sp],
            [st * ct * cp, st * ct * sp, ct**2],
        ]
    )
    return WeightMatrix(entries=entries, kind=WeightKind.LONGITUDINAL)


def unit_vectors(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Broadcast (theta, phi) arrays to unit vectors of shape (..., 3)"""
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def longitudinal_forms(vectors: np.ndarray, tensor: np.ndarray) -> np.ndarray:
    """n^T S n for every row of ``vectors``"""
    return np.einsum("...i,ij,...j->...", vectors, tensor, vectors)


def transverse_forms(vectors: np.ndarray, tensor: np.ndarray) -> np.ndarray:
    """tr S - n^T S n, the contraction with I - n n^T"""
    return np.trace(tensor) - longitudinal_forms(vectors, tensor)
