"""Quaternion feature layers, pseudo-prompt projection, LoRA cross-attention.

Everything here is plain numpy with hand-derived gradients; instances
are desk scale (widths of a few dozen) and embeddings are synthetic
stand-ins for encoder outputs. Vectors are rows; a weight matrix W maps
x to x @ W.T.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import dataio
from .errors import ConfigError, DataError, ShapeError
from .validation import check_in, check_matrix, check_positive_int

_ACTIVATIONS = {
    "identity": (lambda s: s, lambda s: np.ones_like(s)),
    "relu": (lambda s: np.maximum(s, 0.0), lambda s: (s > 0.0).astype(np.float64)),
    "tanh": (np.tanh, lambda s: 1.0 - np.tanh(s) ** 2),
}


def _activation(name: str):
    check_in(name, "activation", set(_ACTIVATIONS))
    return _ACTIVATIONS[name]


def _as_blocks(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim not in (1, 2):
        raise ShapeError(f"{name} must be a vector or a batch of rows, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class QTensor:
    """Quaternion-valued features: four equally shaped real blocks."""

    r: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self) -> None:
        blocks = {name: _as_blocks(getattr(self, name), name) for name in "rxyz"}
        shapes = {b.shape for b in blocks.values()}
        if len(shapes) != 1:
            raise ShapeError(f"quaternion blocks must share one shape, got {sorted(shapes)}")
        for name, b in blocks.items():
            object.__setattr__(self, name, b)

    @property
    def dim(self) -> int:
        return self.r.shape[-1]

    @property
    def shape(self) -> tuple:
        return self.r.shape

    def blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.r, self.x, self.y, self.z


@dataclass(frozen=True)
class QuaternionLayerWeights:
    """Four real matrices (out_dim x in_dim) sharing one shape."""

    w_r: np.ndarray
    w_x: np.ndarray
    w_y: np.ndarray
    w_z: np.ndarray

    def __post_init__(self) -> None:
        ref = check_matrix(self.w_r, "w_r")
        object.__setattr__(self, "w_r", ref)
        for name in ("w_x", "w_y", "w_z"):
            coerced = check_matrix(getattr(self, name), name, rows=ref.shape[0], cols=ref.shape[1])
            object.__setattr__(self, name, coerced)

    @property
    def in_dim(self) -> int:
        return self.w_r.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w_r.shape[0]

    @classmethod
    def init(cls, in_dim: int, out_dim: int, rng: np.random.Generator) -> "QuaternionLayerWeights":
        """Zero-mean uniform blocks scaled by 1/sqrt(in_dim)."""
        check_positive_int(in_dim, "in_dim")
        check_positive_int(out_dim, "out_dim")
        bound = 1.0 / np.sqrt(in_dim)
        draw = lambda: rng.uniform(-bound, bound, size=(out_dim, in_dim))
        return cls(draw(), draw(), draw(), draw())


def _quaternion_layer_forward(weights: QuaternionLayerWeights, q: QTensor, activation: str):
    if q.dim != weights.in_dim:
        raise ShapeError(f"input width {q.dim} does not match layer in_dim {weights.in_dim}")
    f, _ = _activation(activation)
    wr, wx, wy, wz = weights.w_r, weights.w_x, weights.w_y, weights.w_z
    qr, qx, qy, qz = q.blocks()
    # Hamilton pattern lifted to matrices: out = W (x) Q.
    s_r = qr @ wr.T - qx @ wx.T - qy @ wy.T - qz @ wz.T
    s_x = qx @ wr.T + qr @ wx.T + qz @ wy.T - qy @ wz.T
    s_y = qy @ wr.T - qz @ wx.T + qr @ wy.T + qx @ wz.T
    s_z = qz @ wr.T + qy @ wx.T - qx @ wy.T + qr @ wz.T
    out = QTensor(f(s_r), f(s_x), f(s_y), f(s_z))
    cache = (weights, q, activation, (s_r, s_x, s_y, s_z))
    return out, cache


def quaternion_layer(weights: QuaternionLayerWeights, q: QTensor, activation: str = "identity") -> QTensor:
    """Apply out = f(W (x) Q): Hamilton-structured matrix product, then the
    split activation f on each of the four blocks."""
    out, _ = _quaternion_layer_forward(weights, q, activation)
    return out


def quaternion_layer_backward(cache, grad_out: QTensor):
    """Gradients of the layer for an upstream QTensor gradient.

    Returns (weight gradients as QuaternionLayerWeights, input gradient
    as QTensor). Derived by transposing the Hamilton pattern.
    """
    weights, q, activation, pre = cache
    _, df = _activation(activation)
    wr, wx, wy, wz = weights.w_r, weights.w_x, weights.w_y, weights.w_z
    qr, qx, qy, qz = (np.atleast_2d(b) for b in q.blocks())
    g_r, g_x, g_y, g_z = (
        np.atleast_2d(g * df(s)) for g, s in zip(grad_out.blocks(), pre)
    )

    d_wr = g_r.T @ qr + g_x.T @ qx + g_y.T @ qy + g_z.T @ qz
    d_wx = -g_r.T @ qx + g_x.T @ qr - g_y.T @ qz + g_z.T @ qy
    d_wy = -g_r.T @ qy + g_x.T @ qz + g_y.T @ qr - g_z.T @ qx
    d_wz = -g_r.T @ qz - g_x.T @ qy + g_y.T @ qx + g_z.T @ qr

    d_qr = g_r @ wr + g_x @ wx + g_y @ wy + g_z @ wz
    d_qx = -g_r @ wx + g_x @ wr + g_y @ wz - g_z @ wy
    d_qy = -g_r @ wy - g_x @ wz + g_y @ wr + g_z @ wx
    d_qz = -g_r @ wz + g_x @ wy - g_y @ wx + g_z @ wr

    if q.r.ndim == 1:
        d_qr, d_qx, d_qy, d_qz = (a[0] for a in (d_qr, d_qx, d_qy, d_qz))
    w_grads = QuaternionLayerWeights(d_wr, d_wx, d_wy, d_wz)
    return w_grads, QTensor(d_qr, d_qx, d_qy, d_qz)


@dataclass(frozen=True)
class EmbeddingBundle:
    """Synthetic embedding inputs: vision f_o, knowledge e_p, text t_l.

    z_0 is the identically zero fourth block; widths are validated
    against the projection layers at use time.
    """

    f_o: np.ndarray
    e_p: np.ndarray
    t_l: np.ndarray
    z_0: np.ndarray | None = None

    def __post_init__(self) -> None:
        for name in ("f_o", "e_p", "t_l"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 1:
                raise ShapeError(f"{name} must be a 1-D vector, got ndim={arr.ndim}")
            object.__setattr__(self, name, arr)
        z = self.z_0
        if z is None:
            z = np.zeros_like(self.t_l)
        else:
            z = np.asarray(z, dtype=np.float64)
            if z.shape != self.t_l.shape:
                raise ShapeError(f"z_0 shape {z.shape} must match t_l {self.t_l.shape}")
            if np.any(z != 0.0):
                raise DataError("z_0 must be identically zero")
        object.__setattr__(self, "z_0", z)


def project_embeddings(f_o, e_p, l_d1, l_d2) -> tuple[np.ndarray, np.ndarray]:
    """Two separate linear projections into the shared prompt width d."""
    f_o = _as_blocks(f_o, "f_o")
    e_p = _as_blocks(e_p, "e_p")
    l_d1 = check_matrix(l_d1, "l_d1", cols=f_o.shape[-1])
    l_d2 = check_matrix(l_d2, "l_d2", cols=e_p.shape[-1])
    if l_d1.shape[0] != l_d2.shape[0]:
        raise ShapeError(
            f"projections disagree on output width: {l_d1.shape[0]} vs {l_d2.shape[0]}"
        )
    return f_o @ l_d1.T, e_p @ l_d2.T


def assemble_prompt_quaternion(t_l, e_p_hat, f_o_hat) -> QTensor:
    """Place t_l on the real axis, projections on i and j, zero on k."""
    t_l = _as_blocks(t_l, "t_l")
    e_p_hat = _as_blocks(e_p_hat, "e_p_hat")
    f_o_hat = _as_blocks(f_o_hat, "f_o_hat")
    if not (t_l.shape == e_p_hat.shape == f_o_hat.shape):
        raise ShapeError(
            f"prompt blocks must share one shape, got "
            f"{t_l.shape}, {e_p_hat.shape}, {f_o_hat.shape}"
        )
    return QTensor(t_l, e_p_hat, f_o_hat, np.zeros_like(t_l))


@dataclass(frozen=True)
class PromptResult:
    """Projected prompt embedding plus the full quaternion output."""

    e_l: np.ndarray
    q_out: QTensor
    block: str


def pseudo_prompt(
    q_t: QuaternionLayerWeights,
    bundle: EmbeddingBundle,
    l_d1,
    l_d2,
    activation: str = "relu",
    output_block: str = "r",
) -> PromptResult:
    """Full projection: E_L = block of f(Q_t (x) [t_l, e_p_hat, f_o_hat, 0]).

    The real block is the designated prompt output by default; the whole
    QTensor stays available on the result for diagnostics.
    """
    check_in(output_block, "output_block", {"r", "x", "y", "z"})
    f_hat, e_hat = project_embeddings(bundle.f_o, bundle.e_p, l_d1, l_d2)
    q_in = assemble_prompt_quaternion(bundle.t_l, e_hat, f_hat)
    q_out = quaternion_layer(q_t, q_in, activation)
    return PromptResult(e_l=getattr(q_out, output_block), q_out=q_out, block=output_block)


@dataclass(frozen=True)
class LoraAdapter:
    """Frozen base W plus trainable low-rank update: W + scale * B @ A."""

    w: np.ndarray
    a: np.ndarray
    b: np.ndarray
    scale: float = 1.0

    def __post_init__(self) -> None:
        w = check_matrix(self.w, "w")
        a = check_matrix(self.a, "a", cols=w.shape[1])
        b = check_matrix(self.b, "b", rows=w.shape[0], cols=a.shape[0])
        if a.shape[0] < 1:
            raise ConfigError("lora rank must be >= 1")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "scale", float(self.scale))

    @property
    def rank(self) -> int:
        return self.a.shape[0]

    @classmethod
    def init(
        cls, w: np.ndarray, rank: int = 4, rng: np.random.Generator | None = None, scale: float = 1.0
    ) -> "LoraAdapter":
        """A is random (scaled normal), B zero, so the adapted map starts
        exactly equal to the base."""
        w = check_matrix(w, "w")
        check_positive_int(rank, "rank")
        rng = np.random.default_rng(0) if rng is None else rng
        a = rng.standard_normal((rank, w.shape[1])) / np.sqrt(w.shape[1])
        return cls(w=w, a=a, b=np.zeros((w.shape[0], rank)), scale=scale)

    def materialize(self) -> np.ndarray:
        """Dense W + scale * B @ A, for oracle comparisons."""
        return self.w + self.scale * (self.b @ self.a)


def lora_apply(adapter: LoraAdapter, x) -> np.ndarray:
    """(W + scale * B A) x, evaluated along the factored low-rank path."""
    x = _as_blocks(x, "x")
    if x.shape[-1] != adapter.w.shape[1]:
        raise ShapeError(f"input width {x.shape[-1]} does not match W columns {adapter.w.shape[1]}")
    return x @ adapter.w.T + adapter.scale * ((x @ adapter.a.T) @ adapter.b.T)


@dataclass(frozen=True)
class AttentionWeights:
    """Query/key adapters plus the plain value projection.

    w_q maps latent rows (width d_eps) and w_k, w_v map prompt rows
    (width d_tau); w_q and w_k share the attention width d.
    """

    w_q: LoraAdapter
    w_k: LoraAdapter
    w_v: np.ndarray

    def __post_init__(self) -> None:
        if self.w_q.w.shape[0] != self.w_k.w.shape[0]:
            raise ShapeError(
                f"w_q and w_k output widths differ: "
                f"{self.w_q.w.shape[0]} vs {self.w_k.w.shape[0]}"
            )
        object.__setattr__(self, "w_v", check_matrix(self.w_v, "w_v", cols=self.w_k.w.shape[1]))

    @property
    def d(self) -> int:
        return self.w_q.w.shape[0]

    @classmethod
    def init(
        cls,
        latent_dim: int,
        prompt_dim: int,
        d: int,
        out_dim: int,
        rank: int = 4,
        scale: float = 1.0,
        rng: np.random.Generator | None = None,
    ) -> "AttentionWeights":
        rng = np.random.default_rng(0) if rng is None else rng
        draw = lambda rows, cols: rng.standard_normal((rows, cols)) / np.sqrt(cols)
        return cls(
            w_q=LoraAdapter.init(draw(d, latent_dim), rank, rng, scale),
            w_k=LoraAdapter.init(draw(d, prompt_dim), rank, rng, scale),
            w_v=draw(out_dim, prompt_dim),
        )


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row softmax with max subtraction for overflow safety."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _attention_forward(z, y, weights: AttentionWeights):
    z = np.atleast_2d(_as_blocks(z, "z"))
    y = np.atleast_2d(_as_blocks(y, "y"))
    q = lora_apply(weights.w_q, z)
    k = lora_apply(weights.w_k, y)
    if y.shape[-1] != weights.w_v.shape[1]:
        raise ShapeError(
            f"prompt width {y.shape[-1]} does not match w_v columns {weights.w_v.shape[1]}"
        )
    v = y @ weights.w_v.T
    logits = (q @ k.T) / np.sqrt(weights.d)
    s = softmax_rows(logits)
    out = s @ v
    cache = (z, y, weights, q, k, v, s)
    return out, cache


def lora_cross_attention(z, y, weights: AttentionWeights) -> np.ndarray:
    """softmax(Q K' / sqrt(d)) V with Q from the latent rows and K, V from
    the prompt rows; Q and K go through their LoRA adapters."""
    out, _ = _attention_forward(z, y, weights)
    return out


@dataclass(frozen=True)
class AttentionGrads:
    """Gradients of lora_cross_attention inputs and weights."""

    d_z: np.ndarray
    d_y: np.ndarray
    d_wq_w: np.ndarray
    d_wq_a: np.ndarray
    d_wq_b: np.ndarray
    d_wk_w: np.ndarray
    d_wk_a: np.ndarray
    d_wk_b: np.ndarray
    d_wv: np.ndarray


def lora_cross_attention_backward(cache, grad_out: np.ndarray) -> AttentionGrads:
    """Hand-derived vector-Jacobian products for the attention forward."""
    z, y, weights, q, k, v, s = cache
    g = np.atleast_2d(np.asarray(grad_out, dtype=np.float64))
    inv_sqrt_d = 1.0 / np.sqrt(weights.d)

    d_v = s.T @ g
    d_s = g @ v.T
    d_logits = s * (d_s - np.sum(d_s * s, axis=-1, keepdims=True))
    d_q = d_logits @ k * inv_sqrt_d
    d_k = d_logits.T @ q * inv_sqrt_d

    def lora_vjp(adapter: LoraAdapter, x: np.ndarray, d_out: np.ndarray):
        eff = adapter.materialize()
        d_x = d_out @ eff
        d_eff = d_out.T @ x
        d_a = adapter.scale * (adapter.b.T @ d_eff)
        d_b = adapter.scale * (d_eff @ adapter.a.T)
        return d_x, d_eff, d_a, d_b

    d_z, d_wq_w, d_wq_a, d_wq_b = lora_vjp(weights.w_q, z, d_q)
    d_y_k, d_wk_w, d_wk_a, d_wk_b = lora_vjp(weights.w_k, y, d_k)
    d_y = d_y_k + d_v @ weights.w_v
    d_wv = d_v.T @ y
    return AttentionGrads(
        d_z=d_z,
        d_y=d_y,
        d_wq_w=d_wq_w,
        d_wq_a=d_wq_a,
        d_wq_b=d_wq_b,
        d_wk_w=d_wk_w,
        d_wk_a=d_wk_a,
        d_wk_b=d_wk_b,
        d_wv=d_wv,
    )


def fitting_demo(seed: int = 0, n_samples: int = 8, n_iter: int = 150) -> dict:
    """Desk-scale gradient-descent proof: fit the quaternion layer toward a
    random target alignment. Deterministic and fast (well under 1 s).

    Identity activation keeps the problem quadratic in the weights, so the
    descent curve is monotone and the final loss is near zero.
    """
    proj = QuaternionPromptProjector(seed=seed, n_iter=n_iter, activation="identity")
    rng = np.random.default_rng(seed + 1)
    f = rng.standard_normal((n_samples, proj.vision_dim))
    e = rng.standard_normal((n_samples, proj.knowledge_dim))
    targets = rng.standard_normal((n_samples, proj.prompt_dim))
    proj.fit((f, e), targets)
    return {
        "loss_first": proj.loss_curve_[0],
        "loss_last": proj.loss_curve_[-1],
        "n_iter": n_iter,
    }


class QuaternionPromptProjector(BaseEstimator, TransformerMixin):
    """Pseudo-prompt projector with a trainable quaternion layer.

    fit initializes all weights from the seed; given targets y it runs
    plain gradient descent on the quaternion layer (projections and t_l
    stay fixed). transform maps (F, E) row batches to E_L rows.
    """

    def __init__(
        self,
        vision_dim: int = 12,
        knowledge_dim: int = 10,
        prompt_dim: int = 16,
        activation: str = "relu",
        output_block: str = "r",
        learning_rate: float = 0.2,
        n_iter: int = 150,
        seed: int = 0,
    ):
        self.vision_dim = vision_dim
        self.knowledge_dim = knowledge_dim
        self.prompt_dim = prompt_dim
        self.activation = activation
        self.output_block = output_block
        self.learning_rate = learning_rate
        self.n_iter = n_iter
        self.seed = seed

    def _check_params(self) -> None:
        check_positive_int(self.vision_dim, "vision_dim")
        check_positive_int(self.knowledge_dim, "knowledge_dim")
        check_positive_int(self.prompt_dim, "prompt_dim")
        check_positive_int(self.n_iter, "n_iter")
        check_in(self.activation, "activation", set(_ACTIVATIONS))
        check_in(self.output_block, "output_block", {"r", "x", "y", "z"})

    def _split(self, X) -> tuple[np.ndarray, np.ndarray]:
        if not isinstance(X, (tuple, list)) or len(X) != 2:
            raise ShapeError("X must be a (vision, knowledge) pair of row batches")
        f = np.atleast_2d(np.asarray(X[0], dtype=np.float64))
        e = np.atleast_2d(np.asarray(X[1], dtype=np.float64))
        if f.shape[0] != e.shape[0]:
            raise ShapeError(f"batch sizes differ: {f.shape[0]} vs {e.shape[0]}")
        if f.shape[1] != self.vision_dim:
            raise ShapeError(f"vision width {f.shape[1]} != vision_dim {self.vision_dim}")
        if e.shape[1] != self.knowledge_dim:
            raise ShapeError(f"knowledge width {e.shape[1]} != knowledge_dim {self.knowledge_dim}")
        return f, e

    def _forward(self, f: np.ndarray, e: np.ndarray):
        n = f.shape[0]
        q_in = assemble_prompt_quaternion(
            np.tile(self.t_l_, (n, 1)), e @ self.l_d2_.T, f @ self.l_d1_.T
        )
        return _quaternion_layer_forward(self.layer_, q_in, self.activation)

    def fit(self, X=None, y=None):
        self._check_params()
        rng = np.random.default_rng(self.seed)
        d = self.prompt_dim
        bound = 1.0 / np.sqrt(d)
        self.l_d1_ = rng.uniform(-bound, bound, (d, self.vision_dim))
        self.l_d2_ = rng.uniform(-bound, bound, (d, self.knowledge_dim))
        self.t_l_ = rng.uniform(-bound, bound, d)
        self.layer_ = QuaternionLayerWeights.init(d, d, rng)
        self.loss_curve_ = []
        if X is None:
            return self
        f, e = self._split(X)
        if y is None:
            return self
        targets = np.atleast_2d(np.asarray(y, dtype=np.float64))
        if targets.shape != (f.shape[0], d):
            raise ShapeError(f"targets must be ({f.shape[0]}, {d}), got {targets.shape}")
        n = f.shape[0]
        lr = float(self.learning_rate)
        for _ in range(self.n_iter):
            out, cache = self._forward(f, e)
            e_l = getattr(out, self.output_block)
            err = e_l - targets
            self.loss_curve_.append(float(0.5 * np.sum(err**2) / n))
            zero = np.zeros_like(err)
            grads = {"r": zero, "x": zero, "y": zero, "z": zero}
            grads[self.output_block] = err / n
            w_grads, _ = quaternion_layer_backward(cache, QTensor(**grads))
            self.layer_ = QuaternionLayerWeights(
                self.layer_.w_r - lr * w_grads.w_r,
                self.layer_.w_x - lr * w_grads.w_x,
                self.layer_.w_y - lr * w_grads.w_y,
                self.layer_.w_z - lr * w_grads.w_z,
            )
        out, _ = self._forward(f, e)
        err = getattr(out, self.output_block) - targets
        self.loss_curve_.append(float(0.5 * np.sum(err**2) / n))
        return self

    def _require_fitted(self) -> None:
        if not hasattr(self, "layer_"):
            raise NotFittedError("call fit before transform/project")

    def transform(self, X) -> np.ndarray:
        self._require_fitted()
        f, e = self._split(X)
        out, _ = self._forward(f, e)
        return getattr(out, self.output_block)

    def project(self, bundle: EmbeddingBundle) -> PromptResult:
        """Single-bundle convenience around the same weights; the bundle's
        own t_l overrides the fitted one."""
        self._require_fitted()
        return pseudo_prompt(
            self.layer_, bundle, self.l_d1_, self.l_d2_, self.activation, self.output_block
        )

    def save(self, path) -> None:
        """Write weights to a directory of binary tensors plus a manifest."""
        self._require_fitted()
        arrays = {
            "l_d1": self.l_d1_,
            "l_d2": self.l_d2_,
            "t_l": self.t_l_,
            "w_r": self.layer_.w_r,
            "w_x": self.layer_.w_x,
            "w_y": self.layer_.w_y,
            "w_z": self.layer_.w_z,
        }
        dataio.write_weight_bundle(path, arrays, self.get_params())

    @classmethod
    def load(cls, path) -> "QuaternionPromptProjector":
        arrays, meta = dataio.read_weight_bundle(path)
        proj = cls(**meta)
        proj._check_params()
        proj.l_d1_ = arrays["l_d1"]
        proj.l_d2_ = arrays["l_d2"]
        proj.t_l_ = arrays["t_l"]
        proj.layer_ = QuaternionLayerWeights(
            arrays["w_r"], arrays["w_x"], arrays["w_y"], arrays["w_z"]
        )
        proj.loss_curve_ = []
        return proj
