"""The eight physics-consistency metrics over real and generated sequences.

Reference-based metrics (rmse, ssim, sfe, se, qce, ve) compare real
against generated; gs and cs are computed from the generated side alone.
Flow-based metrics operate on the N-1 consecutive-pair flow fields.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter
from sklearn.base import BaseEstimator

from . import diffops
from .errors import ConfigError, LengthError, NumericError
from .fields import FlowField, FrameSequence, validate_pair
from .flow import FlowDiagnostics, FlowParams, sequence_flows
from .validation import check_in, check_positive_int

SSIM_C1 = (0.01 * 255.0) ** 2
SSIM_C2 = (0.03 * 255.0) ** 2
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _crop(arr: np.ndarray, margin: int) -> np.ndarray:
    if margin == 0:
        return arr
    if margin < 0 or 2 * margin >= min(arr.shape):
        raise ConfigError(f"border margin {margin} leaves no pixels on shape {arr.shape}")
    return arr[margin:-margin, margin:-margin]


def _frame_rmse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean((a - b) ** 2)))


def rmse(real: FrameSequence, gen: FrameSequence, border_margin: int = 0) -> float:
    """Per-frame root-mean-square pixel error, averaged over frames."""
    validate_pair(real, gen)
    vals = [
        _frame_rmse(_crop(r.data, border_margin), _crop(g.data, border_margin))
        for r, g in zip(real, gen)
    ]
    return float(np.mean(vals))


def _ssim_global(x: np.ndarray, y: np.ndarray) -> float:
    mx, my = x.mean(), y.mean()
    vx, vy = x.var(), y.var()
    cov = ((x - mx) * (y - my)).mean()
    num = (2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2)
    return float(num / den)


def _ssim_windowed(x: np.ndarray, y: np.ndarray) -> float:
    # 11x11 Gaussian window, sigma 1.5; truncate chosen to stop at radius 5.
    radius = SSIM_WINDOW // 2
    smooth = dict(sigma=SSIM_SIGMA, mode="reflect", truncate=radius / SSIM_SIGMA)
    mx = gaussian_filter(x, **smooth)
    my = gaussian_filter(y, **smooth)
    vx = gaussian_filter(x * x, **smooth) - mx * mx
    vy = gaussian_filter(y * y, **smooth) - my * my
    cov = gaussian_filter(x * y, **smooth) - mx * my
    num = (2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2)
    return float(np.mean(num / den))


def ssim(
    real: FrameSequence, gen: FrameSequence, mode: str = "global", border_margin: int = 0
) -> float:
    """Per-frame structural similarity, averaged over frames.

    mode="global" uses whole-frame statistics; mode="windowed" averages a
    local Gaussian-window SSIM map over pixels.
    """
    validate_pair(real, gen)
    check_in(mode, "ssim mode", {"global", "windowed"})
    per_frame = _ssim_global if mode == "global" else _ssim_windowed
    vals = [
        per_frame(_crop(r.data, border_margin), _crop(g.data, border_margin))
        for r, g in zip(real, gen)
    ]
    return float(np.mean(vals))


def _check_flow_lists(real_flows, gen_flows) -> None:
    if len(real_flows) != len(gen_flows):
        raise LengthError(
            f"flow lists differ in length: {len(real_flows)} vs {len(gen_flows)}"
        )
    if not real_flows:
        raise LengthError("flow lists are empty")


def sfe(real_flows: list[FlowField], gen_flows: list[FlowField], border_margin: int = 0) -> float:
    """RMSE between stream functions, averaged over flow pairs."""
    _check_flow_lists(real_flows, gen_flows)
    vals = []
    for rf, gf in zip(real_flows, gen_flows):
        pr = diffops.stream_function(rf).data
        pg = diffops.stream_function(gf).data
        vals.append(_frame_rmse(_crop(pr, border_margin), _crop(pg, border_margin)))
    return float(np.mean(vals))


def _se_component(real_c: list[np.ndarray], gen_c: list[np.ndarray], margin: int) -> float:
    steps = []
    for t in range(len(real_c) - 1):
        d_real = real_c[t + 1] - real_c[t]
        d_gen = gen_c[t + 1] - gen_c[t]
        steps.append(_frame_rmse(_crop(d_gen, margin), _crop(d_real, margin)))
    return float(np.mean(steps))


def se(
    real_flows: list[FlowField],
    gen_flows: list[FlowField],
    components: str = "both",
    border_margin: int = 0,
) -> float:
    """Timewise smoothness error of the flow.

    RMSE between the temporal flow deltas of gen and real, averaged over
    the available delta steps. components="both" averages the u and v
    results; "u_only" keeps the u component alone.
    """
    _check_flow_lists(real_flows, gen_flows)
    if len(real_flows) < 2:
        raise LengthError("se needs at least 2 flows per list")
    check_in(components, "se components", {"both", "u_only"})
    se_u = _se_component([f.u for f in real_flows], [f.u for f in gen_flows], border_margin)
    if components == "u_only":
        return se_u
    se_v = _se_component([f.v for f in real_flows], [f.v for f in gen_flows], border_margin)
    return 0.5 * (se_u + se_v)


def gs(gen: FrameSequence, border_margin: int = 0) -> float:
    """Temporal smoothness of the frame gradient field, generated side only.

    Per consecutive pair: sqrt(sum((d gx)^2 + (d gy)^2) / (2M)).
    """
    if len(gen) < 2:
        raise LengthError("gs needs at least 2 frames")
    grads = [diffops.gradient(f) for f in gen]
    vals = []
    for t in range(len(grads) - 1):
        ddx = _crop(grads[t + 1].dx - grads[t].dx, border_margin)
        ddy = _crop(grads[t + 1].dy - grads[t].dy, border_margin)
        m = ddx.size
        vals.append(float(np.sqrt((np.sum(ddx**2) + np.sum(ddy**2)) / (2.0 * m))))
    return float(np.mean(vals))


def cs(gen_flows: list[FlowField], border_margin: int = 0) -> float:
    """Continuity: root-mean-square divergence per flow, averaged."""
    if not gen_flows:
        raise LengthError("cs needs at least 1 flow")
    vals = []
    for f in gen_flows:
        div = _crop(diffops.divergence(f).data, border_margin)
        vals.append(float(np.sqrt(np.mean(div**2))))
    return float(np.mean(vals))


def qce(real_flows: list[FlowField], gen_flows: list[FlowField], border_margin: int = 0) -> float:
    """RMSE between Q-criterion fields, averaged over flow pairs."""
    _check_flow_lists(real_flows, gen_flows)
    vals = []
    for rf, gf in zip(real_flows, gen_flows):
        qr = diffops.q_criterion(rf).data
        qg = diffops.q_criterion(gf).data
        vals.append(_frame_rmse(_crop(qr, border_margin), _crop(qg, border_margin)))
    return float(np.mean(vals))


def ve(real_flows: list[FlowField], gen_flows: list[FlowField], border_margin: int = 0) -> float:
    """RMSE between vorticity fields, averaged over flow pairs."""
    _check_flow_lists(real_flows, gen_flows)
    vals = []
    for rf, gf in zip(real_flows, gen_flows):
        wr = diffops.vorticity(rf).data
        wg = diffops.vorticity(gf).data
        vals.append(_frame_rmse(_crop(wr, border_margin), _crop(wg, border_margin)))
    return float(np.mean(vals))


@dataclass
class MetricReport:
    """All metric values for one sequence pair, with run provenance.

    qce and ve stay meaningful only when flow fields carry reference
    semantics; for flows estimated from video they are labeled advisory
    in the notes.
    """

    rmse: float
    ssim: float
    sfe: float
    se: float
    gs: float
    cs: float
    qce: float | None
    ve: float | None
    frame_count: int
    pixel_count: int
    flow_params: FlowParams
    notes: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (-1.0 - 1e-9 <= self.ssim <= 1.0 + 1e-9):
            raise NumericError(f"ssim {self.ssim} outside [-1, 1]")
        for name in ("rmse", "sfe", "se", "gs", "cs", "qce", "ve"):
            val = getattr(self, name)
            if val is not None and val < 0.0:
                raise NumericError(f"{name} must be nonnegative, got {val}")

    def to_dict(self) -> dict:
        return {
            "metrics": {
                "rmse": self.rmse,
                "ssim": self.ssim,
                "sfe": self.sfe,
                "se": self.se,
                "gs": self.gs,
                "cs": self.cs,
                "qce": self.qce,
                "ve": self.ve,
            },
            "frame_count": self.frame_count,
            "pixel_count": self.pixel_count,
            "flow_params": self.flow_params.to_dict(),
            "notes": dict(self.notes),
        }


def evaluate_all(
    real: FrameSequence,
    gen: FrameSequence,
    params: FlowParams | None = None,
    ssim_mode: str = "global",
    se_components: str = "both",
    border_margin: int = 0,
    workers: int = 1,
) -> MetricReport:
    """Compute flows once per sequence, then all eight metrics."""
    validate_pair(real, gen)
    if len(real) < 3:
        raise LengthError(f"evaluate_all needs at least 3 frames, got {len(real)}")
    check_positive_int(workers, "workers")
    params = FlowParams() if params is None else params
    params.validate()
    if border_margin and 4 * border_margin >= min(real.height, real.width):
        raise ConfigError(
            f"border_margin {border_margin} too large for "
            f"{real.height}x{real.width} frames"
        )

    diag_real = FlowDiagnostics()
    diag_gen = FlowDiagnostics()
    real_flows = sequence_flows(real, params, workers=workers, diagnostics=diag_real)
    gen_flows = sequence_flows(gen, params, workers=workers, diagnostics=diag_gen)

    check_in(se_components, "se components", {"both", "u_only"})
    se_u = _se_component([f.u for f in real_flows], [f.u for f in gen_flows], border_margin)
    se_v = _se_component([f.v for f in real_flows], [f.v for f in gen_flows], border_margin)
    se_val = se_u if se_components == "u_only" else 0.5 * (se_u + se_v)

    margin = border_margin
    h, w = real.height, real.width
    eval_h = h - 2 * margin
    eval_w = w - 2 * margin
    notes = {
        "ssim_mode": ssim_mode,
        "se_components": se_components,
        "se_u": se_u,
        "se_v": se_v,
        "border_margin": margin,
        "evaluated_pixels": eval_h * eval_w,
        "singular_pixels_real": diag_real.singular_pixels,
        "singular_pixels_gen": diag_gen.singular_pixels,
        "qce_ve_advisory": True,
    }
    return MetricReport(
        rmse=rmse(real, gen, margin),
        ssim=ssim(real, gen, ssim_mode, margin),
        sfe=sfe(real_flows, gen_flows, margin),
        se=se_val,
        gs=gs(gen, margin),
        cs=cs(gen_flows, margin),
        qce=qce(real_flows, gen_flows, margin),
        ve=ve(real_flows, gen_flows, margin),
        frame_count=len(real),
        pixel_count=h * w,
        flow_params=params,
        notes=notes,
    )


class PhysicsFidelityEvaluator(BaseEstimator):
    """Estimator wrapper around evaluate_all with sklearn-style params."""

    def __init__(
        self,
        pyramid_scale: float = 0.5,
        levels: int = 4,
        window_size: int = 15,
        iterations: int = 3,
        poly_n: int = 5,
        poly_sigma: float = 1.1,
        ssim_mode: str = "global",
        se_components: str = "both",
        border_margin: int = 0,
        workers: int = 1,
    ):
        self.pyramid_scale = pyramid_scale
        self.levels = levels
        self.window_size = window_size
        self.iterations = iterations
        self.poly_n = poly_n
        self.poly_sigma = poly_sigma
        self.ssim_mode = ssim_mode
        self.se_components = se_components
        self.border_margin = border_margin
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
        check_in(self.ssim_mode, "ssim_mode", {"global", "windowed"})
        check_in(self.se_components, "se_components", {"both", "u_only"})
        return self

    def evaluate(self, real: FrameSequence, gen: FrameSequence) -> MetricReport:
        self.fit()
        return evaluate_all(
            real,
            gen,
            self._flow_params(),
            ssim_mode=self.ssim_mode,
            se_components=self.se_components,
            border_margin=self.border_margin,
            workers=self.workers,
        )
