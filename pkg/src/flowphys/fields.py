"""Core data model: frames, frame sequences, flow fields, scalar fields.

All containers are immutable after construction (arrays are locked
read-only), so they are safe to share across worker threads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, LengthError, ShapeError
from .validation import check_2d_array, check_same_shape

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Frame:
    """Single grayscale image with float intensities in nominal range [0, 255]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _freeze(check_2d_array(self.data, "frame data")))

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class FrameSequence:
    """Ordered frames of identical size, with optional fps metadata."""

    frames: tuple
    fps: float | None = None

    def __post_init__(self) -> None:
        frames = tuple(f if isinstance(f, Frame) else Frame(f) for f in self.frames)
        if len(frames) < 2:
            raise LengthError(f"a frame sequence needs at least 2 frames, got {len(frames)}")
        for f in frames[1:]:
            check_same_shape(frames[0].data, f.data, "frames in a sequence")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, i: int) -> Frame:
        return self.frames[i]

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def width(self) -> int:
        return self.frames[0].width

    def as_array(self) -> np.ndarray:
        """Stack frames into an (N, H, W) float array."""
        return np.stack([f.data for f in self.frames])


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement (u, v) in pixels per frame step.

    u is horizontal (along columns, +x right), v is vertical (along rows,
    +y down), matching image index order.
    """

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        u = check_2d_array(self.u, "flow u")
        v = check_2d_array(self.v, "flow v")
        check_same_shape(u, v, "flow components")
        object.__setattr__(self, "u", _freeze(u))
        object.__setattr__(self, "v", _freeze(v))

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]


@dataclass(frozen=True)
class ScalarField:
    """Per-pixel scalar quantity (divergence, vorticity, stream function, ...)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _freeze(check_2d_array(self.data, "scalar field")))

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def to_grayscale(rgb) -> Frame:
    """Convert 3-channel intensities in [0, 255] to a grayscale Frame.

    Uses Rec. 601 luma weights: 0.299 R + 0.587 G + 0.114 B. Accepts an
    (H, W, 3) array or a sequence of three equally shaped 2-D channels.
    """
    if isinstance(rgb, (tuple, list)):
        if len(rgb) != 3:
            raise ShapeError(f"expected 3 channels, got {len(rgb)}")
        channels = [check_2d_array(c, f"channel {i}") for i, c in enumerate(rgb)]
        check_same_shape(channels[0], channels[1], "rgb channels")
        check_same_shape(channels[0], channels[2], "rgb channels")
        stacked = np.stack(channels, axis=-1)
    else:
        stacked = np.asarray(rgb, dtype=np.float64)
        if stacked.ndim != 3 or stacked.shape[-1] != 3:
            raise ShapeError(f"expected an (H, W, 3) array, got shape {stacked.shape}")
    if stacked.min() < 0.0 or stacked.max() > 255.0:
        raise DataError("channel values must lie in [0, 255]")
    luma = (
        LUMA_WEIGHTS[0] * stacked[..., 0]
        + LUMA_WEIGHTS[1] * stacked[..., 1]
        + LUMA_WEIGHTS[2] * stacked[..., 2]
    )
    return Frame(luma)


def validate_pair(a: FrameSequence, b: FrameSequence) -> None:
    """Require equal frame counts and per-frame dimensions; raise otherwise."""
    if len(a) != len(b):
        raise LengthError(f"sequences have different frame counts: {len(a)} vs {len(b)}")
    if (a.height, a.width) != (b.height, b.width):
        raise ShapeError(
            f"sequences have different frame sizes: "
            f"{a.height}x{a.width} vs {b.height}x{b.width}"
        )
