"""Self-contained oracle suite behind the `selftest` CLI subcommand.

Each check recomputes its expected values independently (closed forms,
hand-worked cases, dense oracles) and returns (ok, detail). The suite
needs no test framework so it can run from any installed copy.
"""
from __future__ import annotations

import numpy as np

from . import dataio, diffops, metrics, promptnet, quaternion, synth
from .fields import FlowField, FrameSequence
from .flow import FlowParams, farneback_flow
from .synth import GridSpec


def _rand_quat(rng: np.random.Generator) -> quaternion.Quaternion:
    return quaternion.Quaternion(*rng.standard_normal(4))


def check_quaternion_algebra() -> tuple[bool, str]:
    rng = np.random.default_rng(1234)
    i = quaternion.Quaternion(0, 1, 0, 0)
    j = quaternion.Quaternion(0, 0, 1, 0)
    k = quaternion.Quaternion(0, 0, 0, 1)
    if quaternion.hamilton_product(i, j) != k:
        return False, "i*j != k"
    if quaternion.hamilton_product(j, i) != quaternion.Quaternion(0, 0, 0, -1):
        return False, "j*i != -k"
    worst = 0.0
    for _ in range(200):
        q1, q2, q3 = (_rand_quat(rng) for _ in range(3))
        if quaternion.hamilton_product(quaternion.IDENTITY, q1) != q1:
            return False, "identity failed"
        lhs = quaternion.hamilton_product(quaternion.hamilton_product(q1, q2), q3)
        rhs = quaternion.hamilton_product(q1, quaternion.hamilton_product(q2, q3))
        worst = max(worst, float(np.max(np.abs(quaternion.as_vec(lhs) - quaternion.as_vec(rhs)))))
        prod = quaternion.hamilton_product(q1, q2)
        worst = max(
            worst, abs(quaternion.norm(prod) - quaternion.norm(q1) * quaternion.norm(q2))
        )
        m = quaternion.quaternion_matrix(q1) @ quaternion.quaternion_matrix(q2)
        worst = max(worst, float(np.max(np.abs(m - quaternion.quaternion_matrix(prod)))))
        vec = quaternion.quaternion_matrix(q1) @ quaternion.as_vec(q2)
        worst = max(worst, float(np.max(np.abs(vec - quaternion.as_vec(prod)))))
    ok = worst < 1e-10
    return ok, f"max deviation {worst:.3e}"


def check_layer_scalar_oracle() -> tuple[bool, str]:
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(30):
        wq = _rand_quat(rng)
        q = _rand_quat(rng)
        weights = promptnet.QuaternionLayerWeights(
            *(np.array([[c]]) for c in (wq.r, wq.x, wq.y, wq.z))
        )
        qt = promptnet.QTensor(*(np.array([c]) for c in (q.r, q.x, q.y, q.z)))
        out = promptnet.quaternion_layer(weights, qt, "identity")
        expect = quaternion.hamilton_product(wq, q)
        got = np.array([out.r[0], out.x[0], out.y[0], out.z[0]])
        worst = max(worst, float(np.max(np.abs(got - quaternion.as_vec(expect)))))
    return worst < 1e-10, f"max deviation {worst:.3e}"


def _rel_err(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))


def check_layer_gradients() -> tuple[bool, str]:
    worst = 0.0
    for seed in range(3):
        rng = np.random.default_rng(1000 + seed)
        weights = promptnet.QuaternionLayerWeights.init(5, 4, rng)
        q = promptnet.QTensor(*(rng.standard_normal((3, 5)) for _ in range(4)))
        probe = promptnet.QTensor(*(rng.standard_normal((3, 4)) for _ in range(4)))

        out, cache = promptnet._quaternion_layer_forward(weights, q, "tanh")
        w_grads, _ = promptnet.quaternion_layer_backward(cache, probe)

        def loss(ws: promptnet.QuaternionLayerWeights) -> float:
            o = promptnet.quaternion_layer(ws, q, "tanh")
            return float(sum(np.sum(a * b) for a, b in zip(o.blocks(), probe.blocks())))

        step = 1e-4
        for name in ("w_r", "w_x", "w_y", "w_z"):
            base = getattr(weights, name)
            grad = getattr(w_grads, name)
            for idx in ((0, 0), (2, 3), (1, 4)):
                bumped = {k: getattr(weights, k).copy() for k in ("w_r", "w_x", "w_y", "w_z")}
                bumped[name][idx] = base[idx] + step
                hi = loss(promptnet.QuaternionLayerWeights(**bumped))
                bumped[name][idx] = base[idx] - step
                lo = loss(promptnet.QuaternionLayerWeights(**bumped))
                worst = max(worst, _rel_err(float(grad[idx]), (hi - lo) / (2 * step)))
    return worst < 1e-5, f"max rel err {worst:.3e}"


def check_attention_gradients() -> tuple[bool, str]:
    worst = 0.0
    for seed in range(3):
        rng = np.random.default_rng(2000 + seed)
        weights = promptnet.AttentionWeights.init(5, 6, 4, 3, rank=2, rng=rng)
        z = rng.standard_normal((3, 5))
        y = rng.standard_normal((4, 6))
        probe = rng.standard_normal((3, 3))
        _, cache = promptnet._attention_forward(z, y, weights)
        grads = promptnet.lora_cross_attention_backward(cache, probe)

        def loss(zz, yy) -> float:
            return float(np.sum(promptnet.lora_cross_attention(zz, yy, weights) * probe))

        step = 1e-4
        for arr, grad in ((z, grads.d_z), (y, grads.d_y)):
            for idx in ((0, 0), (1, 2)):
                zp, zm = arr.copy(), arr.copy()
                zp[idx] += step
                zm[idx] -= step
                if arr is z:
                    num = (loss(zp, y) - loss(zm, y)) / (2 * step)
                else:
                    num = (loss(z, zp) - loss(z, zm)) / (2 * step)
                worst = max(worst, _rel_err(float(grad[idx]), num))
    return worst < 1e-5, f"max rel err {worst:.3e}"


def check_lora_zero_b() -> tuple[bool, str]:
    rng = np.random.default_rng(5)
    weights = promptnet.AttentionWeights.init(4, 5, 4, 3, rank=2, rng=rng)
    z = rng.standard_normal((3, 4))
    y = rng.standard_normal((4, 5))
    adapted = promptnet.lora_cross_attention(z, y, weights)
    q = z @ weights.w_q.w.T
    k = y @ weights.w_k.w.T
    v = y @ weights.w_v.T
    base = promptnet.softmax_rows((q @ k.T) / np.sqrt(weights.d)) @ v
    worst = float(np.max(np.abs(adapted - base)))
    return worst < 1e-12, f"max deviation {worst:.3e}"


def check_diffops_rotation() -> tuple[bool, str]:
    grid = GridSpec(64, 64, centered=True)
    flow = synth.rigid_rotation_flow(grid, 0.5)
    vort = diffops.vorticity(flow).data[1:-1, 1:-1]
    qc = diffops.q_criterion(flow).data[1:-1, 1:-1]
    div = diffops.divergence(flow).data[1:-1, 1:-1]
    ok = np.all(vort == 1.0) and np.all(qc == 0.25) and np.all(div == 0.0)
    return bool(ok), "interior vorticity/Q/divergence exact" if ok else "interior values off"


def check_taylor_green_stream() -> tuple[bool, str]:
    grid = GridSpec(128, 128, centered=False)
    psi = diffops.stream_function(synth.taylor_green_flow(grid, 1.0)).data
    ref = synth.taylor_green_stream(grid, 1.0).data
    diff = (psi - psi.mean()) - (ref - ref.mean())
    rel = float(np.max(np.abs(diff)) / np.max(np.abs(ref - ref.mean())))
    return rel < 2e-2, f"stream relative error {rel:.3e}"


def check_metric_hand_values() -> tuple[bool, str]:
    fails = []
    real = FrameSequence((np.zeros((2, 2)), np.zeros((2, 2))))
    gen = FrameSequence((np.array([[0.0, 0.0], [0.0, 2.0]]), np.ones((2, 2))))
    if abs(metrics.rmse(real, gen) - 1.0) > 1e-9:
        fails.append("rmse")

    h = w = 16
    cols = np.tile(np.arange(w, dtype=np.float64), (h, 1))
    ramp = FrameSequence((cols, 2.0 * cols))
    if abs(metrics.gs(ramp) - 1.0 / np.sqrt(2.0)) > 1e-9:
        fails.append("gs")

    grid = GridSpec(32, 32, centered=True)
    x, y = grid.coords()
    radial = FlowField(x, y)
    if abs(metrics.cs([radial]) - 2.0) > 1e-9:
        fails.append("cs")

    rot_pos = synth.rigid_rotation_flow(grid, 0.5)
    rot_neg = synth.rigid_rotation_flow(grid, -0.5)
    if abs(metrics.ve([rot_pos], [rot_neg]) - 2.0) > 1e-9:
        fails.append("ve")

    zero = synth.uniform_flow(grid, 0.0, 0.0)
    if abs(metrics.qce([rot_pos], [zero]) - 0.25) > 1e-9:
        fails.append("qce")

    const = [synth.uniform_flow(grid, 1.0, 1.0)] * 3
    stepping = [synth.uniform_flow(grid, 1.0 + t, 1.0) for t in range(3)]
    if abs(metrics.se(const, stepping) - 0.5) > 1e-9:
        fails.append("se")

    flows_a = [synth.uniform_flow(grid, 2.0, 0.0)]
    flows_b = [synth.uniform_flow(grid, 3.0, 0.0)]
    rows = np.arange(grid.height, dtype=np.float64)
    expect = float(np.sqrt(np.mean(rows**2)))
    if abs(metrics.sfe(flows_a, flows_b) - expect) > 1e-9:
        fails.append("sfe")

    ok = not fails
    return ok, "all hand cases match" if ok else f"mismatched: {', '.join(fails)}"


def check_metric_identity() -> tuple[bool, str]:
    grid = GridSpec(32, 32)
    seq = synth.render_advected_sequence(grid, synth.rigid_rotation_flow(grid, 0.03), 4, 99)
    report = metrics.evaluate_all(seq, seq, FlowParams(levels=2))
    worst = max(
        report.rmse, abs(report.ssim - 1.0), report.sfe, report.se, report.qce, report.ve
    )
    return worst < 1e-9, f"max identity deviation {worst:.3e}"


def check_flow_translation() -> tuple[bool, str]:
    grid = GridSpec(128, 128)
    tex = synth.smoothed_noise_texture(grid, 42)
    shifted = np.roll(tex, shift=(1, 3), axis=(0, 1))
    flow = farneback_flow(tex, shifted, FlowParams())
    m = 16
    u = flow.u[m:-m, m:-m]
    v = flow.v[m:-m, m:-m]
    med = (float(np.median(u)), float(np.median(v)))
    frac = float(np.mean(np.hypot(u - 3.0, v - 1.0) < 0.5))
    ok = abs(med[0] - 3.0) <= 0.25 and abs(med[1] - 1.0) <= 0.25 and frac >= 0.9
    return ok, f"median ({med[0]:.3f}, {med[1]:.3f}), within 0.5 px: {100 * frac:.1f}%"


def check_tensor_roundtrip(tmpdir) -> tuple[bool, str]:
    import tempfile
    from pathlib import Path

    rng = np.random.default_rng(3)
    stack = rng.standard_normal((3, 5, 7)).astype(np.float32)
    with tempfile.TemporaryDirectory(dir=tmpdir) as d:
        p = Path(d) / "t.pft"
        dataio.write_tensor(p, stack)
        back = dataio.read_tensor(p)
    ok = back.shape == (3, 5, 7) and np.array_equal(back.astype(np.float32), stack)
    return ok, "tensor round-trip exact" if ok else "round-trip mismatch"


def check_fitting_demo() -> tuple[bool, str]:
    result = promptnet.fitting_demo(seed=0)
    ok = result["loss_last"] < 0.5 * result["loss_first"]
    return ok, f"loss {result['loss_first']:.4f} -> {result['loss_last']:.4f}"


def run_selftest(tmpdir=None) -> list[tuple[str, bool, str]]:
    checks = [
        ("quaternion_algebra", check_quaternion_algebra),
        ("quaternion_layer_scalar_oracle", check_layer_scalar_oracle),
        ("quaternion_layer_gradients", check_layer_gradients),
        ("attention_gradients", check_attention_gradients),
        ("lora_zero_b_equivalence", check_lora_zero_b),
        ("diffops_rotation_exact", check_diffops_rotation),
        ("taylor_green_stream_function", check_taylor_green_stream),
        ("metric_hand_values", check_metric_hand_values),
        ("metric_identity", check_metric_identity),
        ("flow_translation_recovery", check_flow_translation),
        ("tensor_roundtrip", lambda: check_tensor_roundtrip(tmpdir)),
        ("fitting_demo", check_fitting_demo),
    ]
    results = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, ok, detail))
    return results
