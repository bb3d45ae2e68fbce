"""Input validation helpers.

Small check_* functions used by the estimators and the functional API,
in the spirit of sklearn's check_array: coerce where harmless, raise a
typed error where not.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError, ShapeError


def check_2d_array(x, name: str = "array") -> np.ndarray:
    """Coerce to a 2-D float64 array with finite entries."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} contains non-finite values")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "arrays") -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{what} have mismatched shapes {a.shape} vs {b.shape}")


def check_odd_size(value: int, name: str, minimum: int = 3) -> None:
    if not isinstance(value, (int, np.integer)) or value < minimum or value % 2 == 0:
        raise ConfigError(f"{name} must be an odd integer >= {minimum}, got {value!r}")


def check_positive_int(value: int, name: str, minimum: int = 1) -> None:
    if not isinstance(value, (int, np.integer)) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")


def check_open_unit(value: float, name: str) -> None:
    """Require a float strictly inside (0, 1)."""
    if not (0.0 < float(value) < 1.0):
        raise ConfigError(f"{name} must lie strictly inside (0, 1), got {value!r}")


def check_positive_float(value: float, name: str) -> None:
    v = float(value)
    if not np.isfinite(v) or v <= 0.0:
        raise ConfigError(f"{name} must be a positive finite float, got {value!r}")


def check_in(value, name: str, allowed) -> None:
    if value not in allowed:
        raise ConfigError(f"{name} must be one of {sorted(allowed)}, got {value!r}")


def check_matrix(x, name: str, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    m = check_2d_array(x, name)
    if rows is not None and m.shape[0] != rows:
        raise ShapeError(f"{name} must have {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise ShapeError(f"{name} must have {cols} columns, got {m.shape[1]}")
    return m
