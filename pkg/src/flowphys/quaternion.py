"""Scalar quaternion algebra: Hamilton product and the 4x4 real matrix form."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class Quaternion:
    """q = r + x i + y j + z k."""

    r: float
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        for name in ("r", "x", "y", "z"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise DataError(f"quaternion component {name} is not finite: {val}")
            object.__setattr__(self, name, val)


IDENTITY = Quaternion(1.0, 0.0, 0.0, 0.0)


def hamilton_product(q1: Quaternion, q2: Quaternion) -> Quaternion:
    """Associative, noncommutative product with i^2 = j^2 = k^2 = ijk = -1."""
    return Quaternion(
        r=q1.r * q2.r - q1.x * q2.x - q1.y * q2.y - q1.z * q2.z,
        x=q1.r * q2.x + q1.x * q2.r + q1.y * q2.z - q1.z * q2.y,
        y=q1.r * q2.y - q1.x * q2.z + q1.y * q2.r + q1.z * q2.x,
        z=q1.r * q2.z + q1.x * q2.y - q1.y * q2.x + q1.z * q2.r,
    )


def quaternion_matrix(q: Quaternion) -> np.ndarray:
    """Left-multiplication matrix: quaternion_matrix(q1) @ vec(q2) = vec(q1*q2).

    Rows and columns are ordered (r, x, y, z); the map is a ring
    homomorphism, so quaternion_matrix(q1*q2) equals the matrix product.
    """
    r, x, y, z = q.r, q.x, q.y, q.z
    return np.array(
        [
            [r, -x, -y, -z],
            [x, r, -z, y],
            [y, z, r, -x],
            [z, -y, x, r],
        ]
    )


def norm(q: Quaternion) -> float:
    """Euclidean norm; multiplicative under the Hamilton product."""
    return math.sqrt(q.r * q.r + q.x * q.x + q.y * q.y + q.z * q.z)


def as_vec(q: Quaternion) -> np.ndarray:
    return np.array([q.r, q.x, q.y, q.z])


def from_vec(v) -> Quaternion:
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (4,):
        raise DataError(f"expected 4 components, got shape {arr.shape}")
    return Quaternion(*arr)
