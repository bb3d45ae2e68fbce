"""Discrete differential operators on 2-D fields.

Derivatives use central differences at interior pixels and one-sided
differences at borders, with unit pixel spacing. x runs along columns,
y along rows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import ShapeError
from .fields import FlowField, Frame, ScalarField, _freeze
from .validation import check_2d_array


@dataclass(frozen=True)
class GradientField:
    """Partial derivatives of a scalar field, in field-units per pixel."""

    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "dx", _freeze(check_2d_array(self.dx, "gradient dx")))
        object.__setattr__(self, "dy", _freeze(check_2d_array(self.dy, "gradient dy")))


def _field_data(field) -> np.ndarray:
    if isinstance(field, (ScalarField, Frame)):
        return field.data
    return check_2d_array(field, "field")


def _deriv(arr: np.ndarray, axis: int) -> np.ndarray:
    if arr.shape[axis] < 2:
        raise ShapeError(f"need at least 2 pixels along axis {axis}, got {arr.shape[axis]}")
    return np.gradient(arr, axis=axis, edge_order=1)


def gradient(field) -> GradientField:
    """Return (d/dx, d/dy) of a scalar field or frame."""
    arr = _field_data(field)
    return GradientField(dx=_deriv(arr, 1), dy=_deriv(arr, 0))


def divergence(flow: FlowField) -> ScalarField:
    """du/dx + dv/dy."""
    return ScalarField(_deriv(flow.u, 1) + _deriv(flow.v, 0))


def vorticity(flow: FlowField) -> ScalarField:
    """dv/dx - du/dy, the local rotation rate."""
    return ScalarField(_deriv(flow.v, 1) - _deriv(flow.u, 0))


def q_criterion(flow: FlowField) -> ScalarField:
    """Q = (-(du/dx)^2 - (dv/dy)^2 - 2 (du/dy)(dv/dx)) / 2.

    Positive values mark rotation-dominated regions.
    """
    du_dx = _deriv(flow.u, 1)
    du_dy = _deriv(flow.u, 0)
    dv_dx = _deriv(flow.v, 1)
    dv_dy = _deriv(flow.v, 0)
    return ScalarField(0.5 * (-du_dx**2 - dv_dy**2 - 2.0 * du_dy * dv_dx))


def stream_function(flow: FlowField) -> ScalarField:
    """Stream function psi with psi(0, 0) = 0.

    Integration path is fixed: cumulative trapezoid of u down column 0
    gives psi(0, y); then psi(x, y) = psi(0, y) minus the cumulative
    trapezoid of v along each row. dpsi/dy recovers u and -dpsi/dx
    recovers v up to truncation error.
    """
    u, v = flow.u, flow.v
    col0 = cumulative_trapezoid(u[:, 0], dx=1.0, initial=0.0)
    row_int = cumulative_trapezoid(v, dx=1.0, axis=1, initial=0.0)
    return ScalarField(col0[:, None] - row_int)


def stream_function_path_gap(flow: FlowField) -> float:
    """Max |psi_path1 - psi_path2| between the two integration orders.

    Diagnostic for path dependence on flows that are not numerically
    divergence-free. Zero for exact potential/solenoidal fields.
    """
    psi1 = stream_function(flow).data
    row0 = -cumulative_trapezoid(flow.v[0, :], dx=1.0, initial=0.0)
    col_int = cumulative_trapezoid(flow.u, dx=1.0, axis=0, initial=0.0)
    psi2 = row0[None, :] + col_int
    return float(np.max(np.abs(psi1 - psi2)))
