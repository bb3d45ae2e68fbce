"""Dense optical flow by polynomial expansion with pyramidal refinement.

Each pixel neighborhood is fit as f(x) = x'Ax + b'x + c under a Gaussian
applicability weight. For two frames related by a displacement d, the
linear coefficients satisfy b2 = b1 - 2*A*d, so d solves
A_bar d = -(b2 - b1)/2 with A_bar = (A1 + A2)/2. The per-pixel normal
equations are window-averaged before solving for robustness, and the
whole estimate runs coarse-to-fine over an image pyramid with warping.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict

import numpy as np
from scipy.ndimage import correlate1d, map_coordinates, uniform_filter
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ConfigError, ShapeError
from .fields import FlowField, Frame, FrameSequence, _freeze
from .validation import (
    check_2d_array,
    check_odd_size,
    check_open_unit,
    check_positive_float,
    check_positive_int,
    check_same_shape,
)

SINGULAR_DET = 1e-9
PYRAMID_TAPS = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@dataclass
class FlowParams:
    """Estimator parameters; defaults are the common ones for this method."""

    pyramid_scale: float = 0.5
    levels: int = 4
    window_size: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.1

    def validate(self) -> None:
        check_open_unit(self.pyramid_scale, "pyramid_scale")
        check_positive_int(self.levels, "levels")
        check_odd_size(self.window_size, "window_size", minimum=1)
        check_positive_int(self.iterations, "iterations")
        check_odd_size(self.poly_n, "poly_n")
        check_positive_float(self.poly_sigma, "poly_sigma")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FlowDiagnostics:
    """Counters accumulated across displacement solves."""

    singular_pixels: int = 0


@dataclass(frozen=True)
class PolyCoeffs:
    """Per-pixel quadratic fit: symmetric A (a11, a12, a22), b (b1, b2), c."""

    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    c: np.ndarray

    def __post_init__(self) -> None:
        ref = check_2d_array(self.a11, "a11")
        for name in ("a12", "a22", "b1", "b2", "c"):
            arr = check_2d_array(getattr(self, name), name)
            check_same_shape(ref, arr, "coefficient grids")
            object.__setattr__(self, name, _freeze(arr))
        object.__setattr__(self, "a11", _freeze(ref))

    @property
    def shape(self) -> tuple[int, int]:
        return self.a11.shape


def _frame_data(frame) -> np.ndarray:
    if isinstance(frame, Frame):
        return frame.data
    return check_2d_array(frame, "frame")


def _poly_kernels(poly_n: int, poly_sigma: float):
    n = poly_n // 2
    off = np.arange(-n, n + 1, dtype=np.float64)
    g = np.exp(-(off**2) / (2.0 * poly_sigma**2))
    g /= g.sum()
    return g, g * off, g * off**2, off


def _poly_gram(g: np.ndarray, off: np.ndarray) -> np.ndarray:
    # Gram matrix of the basis [1, x, y, x^2, y^2, xy] under the
    # separable applicability w(x, y) = g(x) g(y).
    w = np.outer(g, g)
    yy, xx = np.meshgrid(off, off, indexing="ij")
    basis = np.stack([np.ones_like(xx), xx, yy, xx**2, yy**2, xx * yy])
    return np.einsum("kij,lij,ij->kl", basis, basis, w)


def polynomial_expansion(frame, poly_n: int = 5, poly_sigma: float = 1.1) -> PolyCoeffs:
    """Weighted least-squares quadratic fit of every pixel neighborhood.

    Correlations run separably with reflective padding; the Gram system
    is solved once since the applicability is shared by all pixels.
    """
    check_odd_size(poly_n, "poly_n")
    check_positive_float(poly_sigma, "poly_sigma")
    arr = _frame_data(frame)
    if min(arr.shape) < poly_n:
        raise ShapeError(f"frame {arr.shape} is smaller than poly_n={poly_n}")

    g, gx, gxx, off = _poly_kernels(poly_n, poly_sigma)
    ry = correlate1d(arr, g, axis=0, mode="reflect")
    ry1 = correlate1d(arr, gx, axis=0, mode="reflect")
    ry2 = correlate1d(arr, gxx, axis=0, mode="reflect")
    proj = np.stack(
        [
            correlate1d(ry, g, axis=1, mode="reflect"),     # 1
            correlate1d(ry, gx, axis=1, mode="reflect"),    # x
            correlate1d(ry1, g, axis=1, mode="reflect"),    # y
            correlate1d(ry, gxx, axis=1, mode="reflect"),   # x^2
            correlate1d(ry2, g, axis=1, mode="reflect"),    # y^2
            correlate1d(ry1, gx, axis=1, mode="reflect"),   # xy
        ]
    )
    gram = _poly_gram(g, off)
    coef = np.linalg.solve(gram, proj.reshape(6, -1)).reshape(proj.shape)
    # The xy basis carries 2*a12 because A is symmetric.
    return PolyCoeffs(
        a11=coef[3], a12=coef[5] / 2.0, a22=coef[4], b1=coef[1], b2=coef[2], c=coef[0]
    )


def displacement_from_coeffs(
    c1: PolyCoeffs,
    c2: PolyCoeffs,
    window: int,
    diagnostics: FlowDiagnostics | None = None,
) -> FlowField:
    """Solve the window-averaged normal equations for the displacement.

    Per pixel, G = A_bar' A_bar and h = A_bar' db with db = -(b2 - b1)/2;
    both are box-averaged over the window before the 2x2 solve. Pixels
    whose averaged determinant falls below 1e-9 get zero displacement and
    bump the diagnostics counter.
    """
    check_odd_size(window, "window", minimum=1)
    if c1.shape != c2.shape:
        raise ShapeError(f"coefficient grids differ: {c1.shape} vs {c2.shape}")

    a11 = 0.5 * (c1.a11 + c2.a11)
    a12 = 0.5 * (c1.a12 + c2.a12)
    a22 = 0.5 * (c1.a22 + c2.a22)
    db1 = -0.5 * (c2.b1 - c1.b1)
    db2 = -0.5 * (c2.b2 - c1.b2)

    g11 = a11 * a11 + a12 * a12
    g12 = a12 * (a11 + a22)
    g22 = a12 * a12 + a22 * a22
    h1 = a11 * db1 + a12 * db2
    h2 = a12 * db1 + a22 * db2

    if window > 1:
        g11, g12, g22, h1, h2 = (
            uniform_filter(m, size=window, mode="reflect") for m in (g11, g12, g22, h1, h2)
        )

    det = g11 * g22 - g12 * g12
    ok = np.abs(det) >= SINGULAR_DET
    safe = np.where(ok, det, 1.0)
    u = np.where(ok, (g22 * h1 - g12 * h2) / safe, 0.0)
    v = np.where(ok, (g11 * h2 - g12 * h1) / safe, 0.0)
    if diagnostics is not None:
        diagnostics.singular_pixels += int(np.count_nonzero(~ok))
    return FlowField(u, v)


def _resize_bilinear(arr: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    # Pixel-center mapping keeps downsampling and flow upsampling aligned.
    if arr.shape == shape:
        return arr.copy()
    sy = arr.shape[0] / shape[0]
    sx = arr.shape[1] / shape[1]
    rows = (np.arange(shape[0], dtype=np.float64) + 0.5) * sy - 0.5
    cols = (np.arange(shape[1], dtype=np.float64) + 0.5) * sx - 0.5
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return map_coordinates(arr, [rr, cc], order=1, mode="nearest")


def _blur5(arr: np.ndarray) -> np.ndarray:
    out = correlate1d(arr, PYRAMID_TAPS, axis=0, mode="reflect")
    return correlate1d(out, PYRAMID_TAPS, axis=1, mode="reflect")


def _level_shapes(shape: tuple[int, int], scale: float, levels: int) -> list[tuple[int, int]]:
    shapes = [shape]
    for _ in range(levels - 1):
        h, w = shapes[-1]
        shapes.append((max(1, int(round(h * scale))), max(1, int(round(w * scale)))))
    return shapes


def max_pyramid_levels(height: int, width: int, pyramid_scale: float, poly_n: int) -> int:
    """Largest level count whose coarsest image still fits poly_n."""
    levels = 0
    h, w = height, width
    while min(h, w) >= poly_n:
        levels += 1
        h, w = max(1, int(round(h * pyramid_scale))), max(1, int(round(w * pyramid_scale)))
    return levels


def _warp(arr: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    rows, cols = np.meshgrid(
        np.arange(arr.shape[0], dtype=np.float64),
        np.arange(arr.shape[1], dtype=np.float64),
        indexing="ij",
    )
    return map_coordinates(arr, [rows + v, cols + u], order=1, mode="nearest")


def farneback_flow(
    f1,
    f2,
    params: FlowParams | None = None,
    diagnostics: FlowDiagnostics | None = None,
) -> FlowField:
    """Estimate the dense flow carrying f1 onto f2, coarse to fine.

    At each pyramid level f2 is warped by the current flow, both frames
    are expanded, and the residual displacement is accumulated for
    `iterations` rounds. With levels=1 and iterations=1 this reduces
    exactly to expansion plus a single displacement solve.
    """
    params = FlowParams() if params is None else params
    params.validate()
    a1 = _frame_data(f1)
    a2 = _frame_data(f2)
    check_same_shape(a1, a2, "frames")

    limit = max_pyramid_levels(a1.shape[0], a1.shape[1], params.pyramid_scale, params.poly_n)
    if params.levels > limit:
        raise ConfigError(
            f"levels={params.levels} too deep for {a1.shape[0]}x{a1.shape[1]} frames "
            f"with poly_n={params.poly_n}; at most {limit} level(s) fit"
        )

    shapes = _level_shapes(a1.shape, params.pyramid_scale, params.levels)
    pyr1, pyr2 = [a1], [a2]
    for shape in shapes[1:]:
        pyr1.append(_resize_bilinear(_blur5(pyr1[-1]), shape))
        pyr2.append(_resize_bilinear(_blur5(pyr2[-1]), shape))

    u = v = None
    for lvl in range(params.levels - 1, -1, -1):
        t1, t2 = pyr1[lvl], pyr2[lvl]
        if u is None:
            u = np.zeros(t1.shape)
            v = np.zeros(t1.shape)
        else:
            u = _resize_bilinear(u, t1.shape) * (t1.shape[1] / prev_shape[1])
            v = _resize_bilinear(v, t1.shape) * (t1.shape[0] / prev_shape[0])
        c1 = polynomial_expansion(t1, params.poly_n, params.poly_sigma)
        for _ in range(params.iterations):
            warped = _warp(t2, u, v)
            c2 = polynomial_expansion(warped, params.poly_n, params.poly_sigma)
            step = displacement_from_coeffs(c1, c2, params.window_size, diagnostics)
            u = u + step.u
            v = v + step.v
        prev_shape = t1.shape
    return FlowField(u, v)


def sequence_flows(
    seq: FrameSequence,
    params: FlowParams | None = None,
    workers: int = 1,
    diagnostics: FlowDiagnostics | None = None,
) -> list[FlowField]:
    """Flows for the N-1 consecutive frame pairs of a sequence."""
    frames = list(seq)
    pairs = list(zip(frames[:-1], frames[1:]))
    if workers > 1:
        diags = [FlowDiagnostics() for _ in pairs]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            flows = list(
                pool.map(lambda t: farneback_flow(t[0][0], t[0][1], params, t[1]), zip(pairs, diags))
            )
        if diagnostics is not None:
            diagnostics.singular_pixels += sum(d.singular_pixels for d in diags)
        return flows
    return [farneback_flow(f1, f2, params, diagnostics) for f1, f2 in pairs]


class FarnebackFlow(BaseEstimator, TransformerMixin):
    """Stateless transformer mapping a frame sequence to its N-1 flow fields.

    Parameters mirror FlowParams. fit only validates them; transform
    accepts a FrameSequence, a list of frames, or an (N, H, W) array.
    """

    def __init__(
        self,
        pyramid_scale: float = 0.5,
        levels: int = 4,
        window_size: int = 15,
        iterations: int = 3,
        poly_n: int = 5,
        poly_sigma: float = 1.1,
        workers: int = 1,
    ):
        self.pyramid_scale = pyramid_scale
        self.levels = levels
        self.window_size = window_size
        self.iterations = iterations
        self.poly_n = poly_n
        self.poly_sigma = poly_sigma
        self.workers = workers

    def _flow_params(self) -> FlowParams:
        return FlowParams(
            pyramid_scale=self.pyramid_scale,
            levels=self.levels,
            window_size=self.window_size,
            iterations=self.iterations,
            poly_n=self.poly_n,
            poly_sigma=self.poly_sigma,
        )

    def fit(self, X=None, y=None):
        self._flow_params().validate()
        return self

    def transform(self, X) -> list[FlowField]:
        seq = X if isinstance(X, FrameSequence) else FrameSequence(tuple(X))
        return sequence_flows(seq, self._flow_params(), workers=self.workers)
