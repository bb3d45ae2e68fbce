"""Acceptance suite: one test per release criterion.

Each test prints a single summary line; `pytest -v` therefore yields one
pass/fail line per criterion. Tolerances are part of the contract and
must not be loosened here.
"""
import json
import time
from pathlib import Path

import numpy as np

from flowphys import dataio, diffops, metrics, promptnet, synth
from flowphys.cli import main
from flowphys.flow import FlowParams, farneback_flow
from flowphys.promptnet import (
    AttentionWeights,
    LoraAdapter,
    QTensor,
    QuaternionLayerWeights,
    lora_cross_attention,
    lora_cross_attention_backward,
    quaternion_layer,
    quaternion_layer_backward,
    softmax_rows,
)
from flowphys.quaternion import (
    IDENTITY,
    Quaternion,
    as_vec,
    from_vec,
    hamilton_product,
    norm,
    quaternion_matrix,
)

DATA_DIR = Path(__file__).parent / "data"


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float((np.abs(analytic - numeric) / scale).max())


def _fd_grad(fn, arr, eps=1e-4):
    g = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = fn()
        flat[i] = orig - eps
        lo = fn()
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * eps)
    return g


def test_c01_quaternion_algebra_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(100)
    i = Quaternion(0, 1, 0, 0)
    j = Quaternion(0, 0, 1, 0)
    k = Quaternion(0, 0, 0, 1)
    assert hamilton_product(i, j) == k
    assert hamilton_product(j, k) == i
    assert hamilton_product(k, i) == j
    assert hamilton_product(i, i) == Quaternion(-1, 0, 0, 0)
    assert hamilton_product(i, j) != hamilton_product(j, i)

    worst_assoc = worst_norm = worst_hom = worst_ident = 0.0
    for _ in range(1000):
        q1, q2, q3 = (from_vec(rng.standard_normal(4)) for _ in range(3))
        u1 = from_vec(as_vec(q1) / norm(q1))
        u2 = from_vec(as_vec(q2) / norm(q2))
        u3 = from_vec(as_vec(q3) / norm(q3))
        left = hamilton_product(hamilton_product(u1, u2), u3)
        right = hamilton_product(u1, hamilton_product(u2, u3))
        worst_assoc = max(worst_assoc, float(np.abs(as_vec(left) - as_vec(right)).max()))

        worst_norm = max(
            worst_norm, abs(norm(hamilton_product(q1, q2)) - norm(q1) * norm(q2))
        )
        hom = quaternion_matrix(hamilton_product(q1, q2)) - quaternion_matrix(
            q1
        ) @ quaternion_matrix(q2)
        worst_hom = max(worst_hom, float(np.abs(hom).max()))
        worst_ident = max(
            worst_ident,
            float(np.abs(as_vec(hamilton_product(IDENTITY, q1)) - as_vec(q1)).max()),
        )
    took = time.perf_counter() - start
    assert worst_assoc < 1e-12
    assert worst_norm < 1e-10
    assert worst_hom < 1e-10
    assert worst_ident == 0.0
    assert took < 1.0
    print(
        f"[C1] quaternion algebra: assoc {worst_assoc:.1e}, norm {worst_norm:.1e}, "
        f"hom {worst_hom:.1e}, {took:.2f}s"
    )


def test_c02_layer_scalar_equivalence_and_linearity():
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(100):
        wv = rng.standard_normal(4)
        qv = rng.standard_normal(4)
        weights = QuaternionLayerWeights(*(np.array([[c]]) for c in wv))
        q = QTensor(*(np.array([c]) for c in qv))
        out = quaternion_layer(weights, q, activation="identity")
        want = as_vec(hamilton_product(Quaternion(*wv), Quaternion(*qv)))
        got = np.array([b[0] for b in out.blocks()])
        worst = max(worst, float(np.abs(got - want).max()))
    assert worst < 1e-10

    weights = QuaternionLayerWeights.init(6, 5, rng)
    qa = QTensor(*(rng.standard_normal(6) for _ in range(4)))
    qb = QTensor(*(rng.standard_normal(6) for _ in range(4)))
    a, b = 0.7, -2.1
    comb = QTensor(*(a * x + b * y for x, y in zip(qa.blocks(), qb.blocks())))
    out_c = quaternion_layer(weights, comb, activation="identity")
    out_a = quaternion_layer(weights, qa, activation="identity")
    out_b = quaternion_layer(weights, qb, activation="identity")
    worst_lin = max(
        float(np.abs(oc - (a * oa + b * ob)).max())
        for oc, oa, ob in zip(out_c.blocks(), out_a.blocks(), out_b.blocks())
    )
    assert worst_lin < 1e-10
    print(f"[C2] scalar oracle {worst:.1e}, linearity {worst_lin:.1e}")


def test_c03_gradient_checks_fifty_seeds():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(200 + seed)

        d_in, d_out, n = 5, 4, 3
        weights = QuaternionLayerWeights.init(d_in, d_out, rng)
        q = QTensor(*(rng.standard_normal((n, d_in)) for _ in range(4)))
        probe = [rng.standard_normal((n, d_out)) for _ in range(4)]
        _, cache = promptnet._quaternion_layer_forward(weights, q, "tanh")
        w_grads, q_grads = quaternion_layer_backward(cache, QTensor(*probe))

        def layer_loss():
            o = quaternion_layer(weights, q, activation="tanh")
            return sum(float(np.sum(p * b)) for p, b in zip(probe, o.blocks()))

        for analytic, arr in (
            (w_grads.w_r, weights.w_r),
            (w_grads.w_x, weights.w_x),
            (q_grads.r, q.r),
            (q_grads.z, q.z),
        ):
            worst = max(worst, _rel_err(analytic, _fd_grad(layer_loss, arr)))

        base = AttentionWeights.init(4, 5, 3, 4, rank=2, rng=rng)
        att = AttentionWeights(
            LoraAdapter(base.w_q.w, base.w_q.a, 0.2 * rng.standard_normal(base.w_q.b.shape), 1.0),
            LoraAdapter(base.w_k.w, base.w_k.a, 0.2 * rng.standard_normal(base.w_k.b.shape), 1.0),
            base.w_v,
        )
        z = rng.standard_normal((3, 4))
        y = rng.standard_normal((2, 5))
        att_probe = rng.standard_normal((3, 4))
        _, att_cache = promptnet._attention_forward(z, y, att)
        grads = lora_cross_attention_backward(att_cache, att_probe)

        def att_loss():
            return float(np.sum(att_probe * lora_cross_attention(z, y, att)))

        for analytic, arr in (
            (grads.d_z, z),
            (grads.d_y, y),
            (grads.d_wv, att.w_v),
            (grads.d_wq_a, att.w_q.a),
            (grads.d_wq_b, att.w_q.b),
            (grads.d_wk_a, att.w_k.a),
            (grads.d_wk_b, att.w_k.b),
            (grads.d_wq_w, att.w_q.w),
            (grads.d_wk_w, att.w_k.w),
        ):
            worst = max(worst, _rel_err(analytic, _fd_grad(att_loss, arr)))
    took = time.perf_counter() - start
    assert worst < 1e-5
    assert took < 10.0
    print(f"[C3] gradcheck over 50 seeds: worst rel err {worst:.1e}, {took:.2f}s")


def test_c04_lora_zero_b_equivalence():
    rng = np.random.default_rng(102)
    weights = AttentionWeights.init(6, 5, 4, 6, rank=3, rng=rng)
    z = rng.standard_normal((4, 6))
    y = rng.standard_normal((3, 5))
    adapted = lora_cross_attention(z, y, weights)
    q = z @ weights.w_q.w.T
    k = y @ weights.w_k.w.T
    base = softmax_rows(q @ k.T / np.sqrt(weights.d)) @ (y @ weights.w_v.T)
    worst = float(np.abs(adapted - base).max())
    assert worst < 1e-12
    print(f"[C4] zero-B adapted vs base attention: {worst:.1e}")


def test_c05_differential_operator_oracles():
    start = time.perf_counter()
    flow = synth.rigid_rotation_flow(synth.GridSpec(64, 64), 0.5)
    interior = np.s_[1:-1, 1:-1]
    assert np.all(diffops.vorticity(flow).data[interior] == 1.0)
    assert np.all(diffops.q_criterion(flow).data[interior] == 0.25)
    assert np.all(diffops.divergence(flow).data[interior] == 0.0)

    grid = synth.GridSpec(128, 128, centered=False)
    psi = diffops.stream_function(synth.taylor_green_flow(grid)).data
    ref = synth.taylor_green_stream(grid).data
    err = (psi - psi.mean()) - (ref - ref.mean())
    rel = float(np.abs(err).max() / np.abs(ref - ref.mean()).max())
    took = time.perf_counter() - start
    assert rel < 2e-2
    assert took < 5.0
    print(f"[C5] rotation identities exact; taylor-green psi rel err {rel:.1e}, {took:.2f}s")


def test_c06_metric_identity_suite(rotation_seq):
    report = metrics.evaluate_all(rotation_seq, rotation_seq, FlowParams())
    assert report.rmse <= 1e-9
    assert abs(report.ssim - 1.0) <= 1e-9
    assert report.sfe <= 1e-9
    assert report.se <= 1e-9
    assert report.qce <= 1e-9
    assert report.ve <= 1e-9
    assert abs(report.gs - metrics.gs(rotation_seq)) <= 1e-9
    print(
        f"[C6] identity metrics: rmse {report.rmse:.1e}, ssim-1 {report.ssim - 1.0:.1e}, "
        f"worst other {max(report.sfe, report.se, report.qce, report.ve):.1e}"
    )


def test_c07_optical_flow_recovery():
    start = time.perf_counter()
    grid = synth.GridSpec(128, 128)
    f1 = synth.smoothed_noise_texture(grid, 42)
    f2 = np.roll(f1, (1, 3), axis=(0, 1))  # 3 px right, 1 px down
    flow = farneback_flow(f1, f2)
    sl = np.s_[16:-16, 16:-16]
    med_u = float(np.median(flow.u[sl]))
    med_v = float(np.median(flow.v[sl]))
    err = np.hypot(flow.u[sl] - 3.0, flow.v[sl] - 1.0)
    frac = float(np.mean(err <= 0.5))
    took = time.perf_counter() - start
    assert abs(med_u - 3.0) <= 0.25
    assert abs(med_v - 1.0) <= 0.25
    assert frac >= 0.9
    assert took < 10.0
    print(
        f"[C7] flow recovery: median ({med_u:.3f}, {med_v:.3f}), "
        f"{100 * frac:.1f}% within 0.5 px, {took:.2f}s"
    )


def test_c08_metric_discrimination_ordering():
    grid = synth.GridSpec(64, 64)
    real = synth.render_advected_sequence(grid, synth.rigid_rotation_flow(grid, 0.05), 8, 7)
    ve_vals, qce_vals = [], []
    for omega in (0.05, 0.04, 0.02):
        gen = synth.render_advected_sequence(grid, synth.rigid_rotation_flow(grid, omega), 8, 7)
        report = metrics.evaluate_all(real, gen, FlowParams(), workers=2)
        ve_vals.append(report.ve)
        qce_vals.append(report.qce)
    assert ve_vals[0] < ve_vals[1] < ve_vals[2]
    assert qce_vals[0] < qce_vals[1] < qce_vals[2]
    print(f"[C8] ordering: ve {ve_vals}, qce {qce_vals}")


def test_c09_hand_computed_metric_values():
    from flowphys.fields import FlowField, FrameSequence

    real = FrameSequence((np.zeros((2, 2)), np.zeros((2, 2))))
    gen = FrameSequence((np.array([[0.0, 0.0], [0.0, 2.0]]), np.ones((2, 2))))
    assert abs(metrics.rmse(real, gen) - 1.0) <= 1e-9

    x, _ = synth.GridSpec(16, 16, centered=False).coords()
    ramp = FrameSequence((x, 2.0 * x))
    assert abs(metrics.gs(ramp) - 1.0 / np.sqrt(2.0)) <= 1e-9

    xc, yc = synth.GridSpec(32, 32).coords()
    assert abs(metrics.cs([FlowField(xc, yc)]) - 2.0) <= 1e-9

    grid = synth.GridSpec(32, 32)
    pos = [synth.rigid_rotation_flow(grid, 0.5)]
    neg = [synth.rigid_rotation_flow(grid, -0.5)]
    assert abs(metrics.ve(pos, neg) - 2.0) <= 1e-9
    print("[C9] hand values: rmse 1.0, gs 1/sqrt(2), cs 2.0, ve 2.0 all within 1e-9")


def test_c10_cli_end_to_end_with_golden_report(tmp_path, capsys):
    start = time.perf_counter()
    assert main(["selftest"]) == 0

    def synth_args(out_dir, omega):
        return ["synth", "--kind", "rotation", "--omega", str(omega),
                "--width", "64", "--height", "64", "--frames", "8", "--seed", "7",
                "--out", str(out_dir)]

    assert main(synth_args(tmp_path / "real_bench", 0.05)) == 0
    assert main(synth_args(tmp_path / "gen_bench", 0.03)) == 0
    report_path = tmp_path / "report.json"
    rc = main([
        "evaluate",
        "--real", str(tmp_path / "real_bench"),
        "--gen", str(tmp_path / "gen_bench"),
        "--config", str(DATA_DIR / "benchmark_config.json"),
        "--output", str(report_path),
    ])
    took = time.perf_counter() - start
    assert rc == 0
    assert took < 60.0

    golden = (DATA_DIR / "golden_report.json").read_bytes()
    got = report_path.read_bytes()
    assert got == golden, "report does not match the committed golden file byte-for-byte"
    report = json.loads(got)
    assert report["schema_version"] == 1
    print(f"[C10] selftest + synth + evaluate in {took:.2f}s; golden report bit-exact")


def test_committed_taylor_green_heatmap_fixture():
    """Visual fixture: the committed psi heatmap must match a fresh render."""
    from PIL import Image

    grid = synth.GridSpec(128, 128, centered=False)
    fresh_rgb, vmin, vmax = dataio.scalar_heatmap(synth.taylor_green_stream(grid).data)
    im = Image.open(DATA_DIR / "taylor_green_psi.png")
    np.testing.assert_array_equal(np.asarray(im), fresh_rgb)
    assert float(im.text["field_min"]) == vmin
    assert float(im.text["field_max"]) == vmax
    # checkerboard of extrema: alternating pure-saturation quadrant centers
    px = np.asarray(im)
    assert tuple(px[32, 32]) == (180, 4, 38)
    assert tuple(px[32, 96]) == (59, 76, 192)
    assert tuple(px[96, 32]) == (59, 76, 192)
    assert tuple(px[96, 96]) == (180, 4, 38)
