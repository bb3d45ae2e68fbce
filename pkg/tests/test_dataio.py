import json
import struct

import numpy as np
import pytest
from PIL import Image

from flowphys import dataio, synth
from flowphys.errors import DataError, LengthError, ShapeError
from flowphys.fields import FlowField, FrameSequence


def test_tensor_roundtrip_exact(tmp_path, rng):
    frames = rng.random((3, 5, 7)).astype(np.float32).astype(np.float64)
    path = tmp_path / "t.pft"
    dataio.write_tensor(path, frames)
    np.testing.assert_array_equal(dataio.read_tensor(path), frames)


def test_tensor_header_layout(tmp_path):
    frames = np.zeros((2, 3, 4))
    path = tmp_path / "t.pft"
    dataio.write_tensor(path, frames)
    raw = path.read_bytes()
    assert raw[:4] == b"PFT1"
    assert struct.unpack("<III", raw[4:16]) == (2, 3, 4)
    assert len(raw) == 16 + 2 * 3 * 4 * 4


def test_tensor_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.pft"
    path.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(DataError):
        dataio.read_tensor(path)


def test_tensor_rejects_truncated(tmp_path):
    path = tmp_path / "short.pft"
    path.write_bytes(b"PFT1" + struct.pack("<III", 2, 4, 4) + b"\x00" * 10)
    with pytest.raises(DataError):
        dataio.read_tensor(path)


def test_pgm_roundtrip(tmp_path):
    arr = np.arange(20, dtype=np.float64).reshape(4, 5) * 12.0
    path = tmp_path / "f.pgm"
    dataio.write_pgm(path, arr)
    np.testing.assert_array_equal(dataio.read_pgm(path), np.clip(np.rint(arr), 0, 255))


def test_pgm_parser_handles_comments(tmp_path):
    path = tmp_path / "c.pgm"
    body = bytes(range(6))
    path.write_bytes(b"P5\n# a comment\n3 2\n# another\n255\n" + body)
    arr = dataio.read_pgm(path)
    np.testing.assert_array_equal(arr, np.arange(6, dtype=np.float64).reshape(2, 3))


def test_pgm_rejects_wide_maxval(tmp_path):
    path = tmp_path / "wide.pgm"
    path.write_bytes(b"P5\n2 2\n65535\n" + b"\x00" * 8)
    with pytest.raises(DataError):
        dataio.read_pgm(path)


def test_pgm_rejects_ascii_format(tmp_path):
    path = tmp_path / "ascii.pgm"
    path.write_bytes(b"P2\n2 2\n255\n0 1 2 3\n")
    with pytest.raises(DataError):
        dataio.read_pgm(path)


def test_load_image_png_rgb_uses_luma(tmp_path):
    rgb = np.zeros((4, 4, 3), dtype=np.uint8)
    rgb[..., 0] = 200
    rgb[..., 1] = 100
    rgb[..., 2] = 50
    path = tmp_path / "c.png"
    Image.fromarray(rgb).save(path)
    gray = dataio.load_image(path)
    expected = 0.299 * 200 + 0.587 * 100 + 0.114 * 50
    np.testing.assert_allclose(gray, expected, atol=1e-9)


def test_load_sequence_directory_sorted(tmp_path, rng):
    frames = [np.rint(rng.random((6, 8)) * 255) for _ in range(3)]
    # write out of order; lexicographic name order must win
    for idx, name in [(2, "f002.pgm"), (0, "f000.pgm"), (1, "f001.pgm")]:
        dataio.write_pgm(tmp_path / name, frames[idx])
    seq = dataio.load_sequence(tmp_path)
    assert len(seq) == 3
    for got, want in zip(seq, frames):
        np.testing.assert_array_equal(got.data, want)


def test_load_sequence_needs_two_frames(tmp_path):
    dataio.write_pgm(tmp_path / "only.pgm", np.zeros((4, 4)))
    with pytest.raises(LengthError):
        dataio.load_sequence(tmp_path)
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(LengthError):
        dataio.load_sequence(empty)


def test_load_sequence_rejects_mixed_shapes(tmp_path):
    dataio.write_pgm(tmp_path / "a.pgm", np.zeros((4, 4)))
    dataio.write_pgm(tmp_path / "b.pgm", np.zeros((4, 5)))
    with pytest.raises(ShapeError):
        dataio.load_sequence(tmp_path)


def test_save_sequence_pgm_names(tmp_path):
    seq = FrameSequence((np.zeros((4, 4)), np.ones((4, 4))))
    paths = dataio.save_sequence_pgm(tmp_path, seq)
    assert [p.name for p in paths] == ["f000.pgm", "f001.pgm"]
    loaded = dataio.load_sequence(tmp_path)
    np.testing.assert_array_equal(loaded.as_array(), seq.as_array())


def test_sequence_digest_tracks_content():
    a = FrameSequence((np.zeros((4, 4)), np.ones((4, 4))))
    b = FrameSequence((np.zeros((4, 4)), np.ones((4, 4))))
    c = FrameSequence((np.zeros((4, 4)), np.full((4, 4), 2.0)))
    assert dataio.sequence_digest(a) == dataio.sequence_digest(b)
    assert dataio.sequence_digest(a) != dataio.sequence_digest(c)
    assert len(dataio.sequence_digest(a)) == 64


def test_scalar_heatmap_zero_field_is_mid_color():
    rgb, vmin, vmax = dataio.scalar_heatmap(np.zeros((5, 5)))
    assert vmin == 0.0 and vmax == 0.0
    assert np.all(rgb == np.array([255, 255, 255], dtype=np.uint8))


def test_scalar_heatmap_symmetric_extremes():
    data = np.array([[-2.0, 0.0, 2.0]])
    rgb, vmin, vmax = dataio.scalar_heatmap(data)
    assert vmin == -2.0 and vmax == 2.0
    assert rgb[0, 0, 2] > rgb[0, 0, 0]  # negative end is blue
    assert rgb[0, 2, 0] > rgb[0, 2, 2]  # positive end is red
    np.testing.assert_array_equal(rgb[0, 1], [255, 255, 255])


def test_scalar_heatmap_asymmetric_range_still_centered():
    # max |value| sets the scale on both sides
    data = np.array([[-1.0, 0.0, 4.0]])
    rgb, vmin, vmax = dataio.scalar_heatmap(data)
    assert vmin == -1.0 and vmax == 4.0
    mid = rgb[0, 1].astype(int)
    lo = rgb[0, 0].astype(int)
    assert np.abs(mid - lo).max() < np.abs(np.array([255, 255, 255]) - np.array([59, 76, 192])).max()


def test_flow_heatmap_zero_flow_is_black():
    flow = FlowField(np.zeros((4, 4)), np.zeros((4, 4)))
    rgb, lo, peak = dataio.flow_heatmap(flow)
    assert peak == 0.0
    assert np.all(rgb == 0)


def test_flow_heatmap_hue_varies_with_direction():
    right = FlowField(np.ones((2, 2)), np.zeros((2, 2)))
    up = FlowField(np.zeros((2, 2)), np.ones((2, 2)))
    rgb_r, _, _ = dataio.flow_heatmap(right)
    rgb_u, _, _ = dataio.flow_heatmap(up)
    assert not np.array_equal(rgb_r, rgb_u)


def test_emit_heatmap_png_metadata(tmp_path):
    data = np.linspace(-1.0, 1.0, 16).reshape(4, 4)
    out = dataio.emit_heatmap(data, tmp_path / "h.png")
    im = Image.open(out)
    assert im.size == (4, 4)
    assert im.text["encoding"] == "scalar_diverging"
    assert float(im.text["field_min"]) == -1.0
    assert float(im.text["field_max"]) == 1.0


def test_emit_heatmap_ppm_comments(tmp_path):
    flow = FlowField(np.ones((3, 3)), np.zeros((3, 3)))
    out = dataio.emit_heatmap(flow, tmp_path / "h.ppm")
    raw = out.read_bytes()
    assert raw.startswith(b"P6\n")
    header = raw.split(b"255\n", 1)[0].decode()
    assert "# encoding flow_hsv" in header
    assert "# magnitude_max" in header


def test_weight_bundle_roundtrip(tmp_path, rng):
    arrays = {
        "mat": rng.standard_normal((3, 4)),
        "vec": rng.standard_normal(5),
    }
    meta = {"activation": "relu", "n": 3}
    dataio.write_weight_bundle(tmp_path / "b", arrays, meta)
    loaded, got_meta = dataio.read_weight_bundle(tmp_path / "b")
    assert got_meta == meta
    # storage is float32; values must round-trip through that exactly
    for name, arr in arrays.items():
        np.testing.assert_array_equal(loaded[name], arr.astype(np.float32).astype(np.float64))
        assert loaded[name].shape == arr.shape
    manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert set(manifest["arrays"]) == {"mat", "vec"}


def test_write_json_report_stable(tmp_path):
    path = tmp_path / "r.json"
    dataio.write_json_report(path, {"b": 2, "a": {"d": 4, "c": 3}})
    text = path.read_text()
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"b": 2, "a": {"d": 4, "c": 3}}


def test_load_sequence_tensor_file(tmp_path, rng):
    frames = np.rint(rng.random((4, 6, 6)) * 255)
    path = tmp_path / "seq.pft"
    dataio.write_tensor(path, frames)
    seq = dataio.load_sequence(path)
    assert len(seq) == 4
    np.testing.assert_array_equal(seq.as_array(), frames)


def test_load_sequence_tensor_directory(tmp_path, rng):
    frames = np.rint(rng.random((4, 6, 6)) * 255)
    dataio.write_tensor(tmp_path / "frames.pft", frames)
    seq = dataio.load_sequence(tmp_path)
    np.testing.assert_array_equal(seq.as_array(), frames)


def test_load_sequence_rejects_ambiguous_tensors(tmp_path, rng):
    frames = np.rint(rng.random((2, 4, 4)) * 255)
    dataio.write_tensor(tmp_path / "a.pft", frames)
    dataio.write_tensor(tmp_path / "b.pft", frames)
    with pytest.raises(DataError, match="2 tensor files"):
        dataio.load_sequence(tmp_path)


def test_read_tensor_truncated_header(tmp_path):
    path = tmp_path / "short.pft"
    path.write_bytes(b"PFT1garb")
    with pytest.raises(DataError, match="truncated"):
        dataio.read_tensor(path)
