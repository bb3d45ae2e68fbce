"""Analytic flow fields and rendered sequences used as ground-truth oracles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from .errors import ConfigError
from .fields import FlowField, Frame, FrameSequence, ScalarField

TEXTURE_SIGMA = 2.0


@dataclass(frozen=True)
class GridSpec:
    """Pixel grid for synthetic fields; centered puts the origin mid-grid."""

    width: int
    height: int
    centered: bool = True

    def __post_init__(self) -> None:
        if self.width < 8 or self.height < 8:
            raise ConfigError(f"grid must be at least 8x8, got {self.width}x{self.height}")

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (x, y) coordinate grids, shape (height, width)."""
        xs = np.arange(self.width, dtype=np.float64)
        ys = np.arange(self.height, dtype=np.float64)
        if self.centered:
            xs -= (self.width - 1) / 2.0
            ys -= (self.height - 1) / 2.0
        return np.meshgrid(xs, ys)


def uniform_flow(grid: GridSpec, dx: float, dy: float) -> FlowField:
    """Constant displacement (dx, dy) everywhere."""
    shape = (grid.height, grid.width)
    return FlowField(np.full(shape, float(dx)), np.full(shape, float(dy)))


def rigid_rotation_flow(grid: GridSpec, omega: float) -> FlowField:
    """Solid-body rotation u = -omega*y, v = omega*x about the grid center.

    Analytic identities: vorticity 2*omega, Q-criterion omega^2,
    divergence 0.
    """
    if not grid.centered:
        raise ConfigError("rigid rotation needs a centered grid")
    x, y = grid.coords()
    return FlowField(-omega * y, omega * x)


def taylor_green_flow(grid: GridSpec, amplitude: float = 1.0) -> FlowField:
    """Divergence-free vortex lattice on normalized coordinates in [0, 2pi).

    u = A sin(X) cos(Y), v = -A cos(X) sin(Y) with X = 2pi*col/width and
    Y = 2pi*row/height.
    """
    xn, yn = _normalized_coords(grid)
    u = amplitude * np.sin(xn) * np.cos(yn)
    v = -amplitude * np.cos(xn) * np.sin(yn)
    return FlowField(u, v)


def taylor_green_stream(grid: GridSpec, amplitude: float = 1.0) -> ScalarField:
    """Closed-form stream function A sin(X) sin(Y) / k with k = 2pi/width."""
    xn, yn = _normalized_coords(grid)
    k = 2.0 * np.pi / grid.width
    return ScalarField(amplitude * np.sin(xn) * np.sin(yn) / k)


def _normalized_coords(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    xs = 2.0 * np.pi * np.arange(grid.width, dtype=np.float64) / grid.width
    ys = 2.0 * np.pi * np.arange(grid.height, dtype=np.float64) / grid.height
    return np.meshgrid(xs, ys)


def smoothed_noise_texture(grid: GridSpec, seed: int) -> np.ndarray:
    """Seeded noise blurred with sigma=2 and rescaled to [0, 255].

    Smoothing keeps optical flow well conditioned (no flat regions).
    """
    rng = np.random.default_rng(seed)
    noise = rng.random((grid.height, grid.width))
    tex = gaussian_filter(noise, sigma=TEXTURE_SIGMA, mode="reflect")
    lo, hi = tex.min(), tex.max()
    if hi == lo:
        return np.full_like(tex, 127.5)
    return (tex - lo) / (hi - lo) * 255.0


def advect_backward(frame: np.ndarray, flow: FlowField) -> np.ndarray:
    """Semi-Lagrangian step: sample the frame at p - flow(p), bilinear, edge-clamped."""
    rows, cols = np.meshgrid(
        np.arange(frame.shape[0], dtype=np.float64),
        np.arange(frame.shape[1], dtype=np.float64),
        indexing="ij",
    )
    return map_coordinates(frame, [rows - flow.v, cols - flow.u], order=1, mode="nearest")


def render_advected_sequence(
    grid: GridSpec, flow: FlowField, n_frames: int, texture_seed: int
) -> FrameSequence:
    """Render n_frames by repeatedly advecting a seeded smooth texture.

    Frame 0 is the texture; frame t+1 backward-samples frame t along the
    flow. Every frame is quantized to integer gray levels so rendered
    sequences survive 8-bit image round-trips exactly. Deterministic for
    a fixed seed.
    """
    if n_frames < 2:
        raise ConfigError(f"n_frames must be >= 2, got {n_frames}")
    if (flow.height, flow.width) != (grid.height, grid.width):
        raise ConfigError(
            f"flow shape {flow.height}x{flow.width} does not match "
            f"grid {grid.height}x{grid.width}"
        )
    frames = [_quantize(smoothed_noise_texture(grid, texture_seed))]
    for _ in range(n_frames - 1):
        frames.append(_quantize(advect_backward(frames[-1], flow)))
    return FrameSequence(tuple(Frame(f) for f in frames))


def _quantize(frame: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(frame, 0.0, 255.0))
