"""File I/O: PGM/PNG frames, the binary tensor format, heatmaps, reports.

Tensor container layout: magic "PFT1", three little-endian uint32
(N, H, W), then N*H*W little-endian float32, row-major within a frame,
frame-major across frames.
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image, PngImagePlugin

from .errors import DataError, LengthError, ShapeError
from .fields import FlowField, Frame, FrameSequence, ScalarField, to_grayscale

TENSOR_MAGIC = b"PFT1"
IMAGE_SUFFIXES = {".png", ".pgm"}

# Diverging endpoints for signed scalar maps (blue, white, red).
_NEG_COLOR = np.array([59.0, 76.0, 192.0])
_MID_COLOR = np.array([255.0, 255.0, 255.0])
_POS_COLOR = np.array([180.0, 4.0, 38.0])


def write_tensor(path, frames: np.ndarray) -> None:
    """Write an (N, H, W) float stack to the binary tensor format."""
    arr = np.asarray(frames, dtype=np.float32)
    if arr.ndim != 3:
        raise ShapeError(f"tensor files hold (N, H, W) stacks, got shape {arr.shape}")
    n, h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<III", n, h, w))
        fh.write(arr.astype("<f4").tobytes(order="C"))


def read_tensor(path) -> np.ndarray:
    """Read a tensor file back as an (N, H, W) float64 stack."""
    raw = Path(path).read_bytes()
    if raw[:4] != TENSOR_MAGIC:
        raise DataError(f"{path} is not a tensor file (bad magic)")
    if len(raw) < 16:
        raise DataError(f"{path} truncated: header needs 16 bytes, got {len(raw)}")
    n, h, w = struct.unpack("<III", raw[4:16])
    expected = 16 + 4 * n * h * w
    if len(raw) != expected:
        raise DataError(f"{path} truncated: expected {expected} bytes, got {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=16).reshape(n, h, w)
    return data.astype(np.float64)


def write_pgm(path, arr: np.ndarray) -> None:
    """Write an 8-bit binary PGM; values are rounded and clipped to [0, 255]."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"pgm needs a 2-D array, got shape {a.shape}")
    quant = np.clip(np.rint(a), 0, 255).astype(np.uint8)
    h, w = quant.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(quant.tobytes(order="C"))


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) 8-bit PGM as a float64 array."""
    raw = Path(path).read_bytes()
    if raw[:2] != b"P5":
        raise DataError(f"{path} is not a binary PGM")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        if pos >= len(raw):
            raise DataError(f"{path} has a truncated PGM header")
        ch = raw[pos : pos + 1]
        if ch == b"#":
            pos = raw.index(b"\n", pos) + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(raw) and not raw[end : end + 1].isspace():
                end += 1
            fields.append(int(raw[pos:end]))
            pos = end
    w, h, maxval = fields
    if maxval > 255:
        raise DataError(f"{path}: only 8-bit PGMs are supported (maxval {maxval})")
    pos += 1
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=pos, count=h * w)
    if pixels.size != h * w:
        raise DataError(f"{path} truncated: expected {h * w} pixels")
    return pixels.reshape(h, w).astype(np.float64)


def load_image(path) -> np.ndarray:
    """Load a grayscale or RGB image file as float64 grayscale."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)
    with Image.open(path) as img:
        if img.mode in ("L", "I;16", "I"):
            return np.asarray(img.convert("F"), dtype=np.float64)
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
    return to_grayscale(rgb).data.copy()


def load_sequence(path) -> FrameSequence:
    """Load a sequence from an image directory or a tensor file.

    Directories are read in lexicographic name order; RGB images are
    converted to grayscale on load. A directory with no frame images
    but a single .pft file loads that tensor.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        if files:
            if len(files) < 2:
                raise LengthError(f"{path} holds {len(files)} frame image(s); need at least 2")
            return FrameSequence(tuple(Frame(load_image(p)) for p in files))
        tensors = sorted(p for p in path.iterdir() if p.suffix.lower() == ".pft")
        if len(tensors) > 1:
            raise DataError(f"{path} holds {len(tensors)} tensor files; pass one explicitly")
        if not tensors:
            raise LengthError(f"{path} holds 0 frame image(s); need at least 2")
        path = tensors[0]
    stack = read_tensor(path)
    if stack.shape[0] < 2:
        raise LengthError(f"{path} holds {stack.shape[0]} frame(s); need at least 2")
    return FrameSequence(tuple(Frame(f) for f in stack))


def save_sequence_pgm(dirpath, seq: FrameSequence, prefix: str = "f") -> list[Path]:
    """Write one PGM per frame, zero-padded names in frame order."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(seq):
        p = dirpath / f"{prefix}{i:03d}.pgm"
        write_pgm(p, frame.data)
        paths.append(p)
    return paths


def sequence_digest(seq: FrameSequence) -> str:
    """Content digest of the frame data (float32, row-major), path-free."""
    stack = seq.as_array().astype("<f4")
    return hashlib.sha256(stack.tobytes(order="C")).hexdigest()


def scalar_heatmap(data: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Signed diverging colormap, symmetric about zero.

    Returns (rgb uint8 image, min, max). A constant-zero field maps to
    the uniform mid color.
    """
    arr = np.asarray(data, dtype=np.float64)
    vmin, vmax = float(arr.min()), float(arr.max())
    span = max(abs(vmin), abs(vmax))
    t = np.zeros_like(arr) if span == 0.0 else np.clip(arr / span, -1.0, 1.0)
    rgb = np.empty(arr.shape + (3,), dtype=np.float64)
    neg = t < 0
    for c in range(3):
        rgb[..., c] = np.where(
            neg,
            _MID_COLOR[c] + (-t) * (_NEG_COLOR[c] - _MID_COLOR[c]),
            _MID_COLOR[c] + t * (_POS_COLOR[c] - _MID_COLOR[c]),
        )
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8), vmin, vmax


def flow_heatmap(flow: FlowField) -> tuple[np.ndarray, float, float]:
    """HSV direction/magnitude rendering: hue = angle, value = magnitude."""
    mag = np.hypot(flow.u, flow.v)
    peak = float(mag.max())
    hue = (np.arctan2(flow.v, flow.u) / (2.0 * np.pi)) % 1.0
    val = mag / peak if peak > 0.0 else np.zeros_like(mag)
    rgb = _hsv_to_rgb(hue, np.ones_like(hue), val)
    return np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8), 0.0, peak


def _hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    i = np.floor(h * 6.0).astype(int) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    channels = [
        np.choose(i, [v, q, p, p, t, v]),
        np.choose(i, [t, v, v, q, p, p]),
        np.choose(i, [p, p, t, v, v, q]),
    ]
    return np.stack(channels, axis=-1)


def write_heatmap_png(path, rgb: np.ndarray, meta: dict) -> None:
    info = PngImagePlugin.PngInfo()
    for key, val in meta.items():
        info.add_text(str(key), str(val))
    Image.fromarray(rgb, mode="RGB").save(path, format="PNG", pnginfo=info)


def write_heatmap_ppm(path, rgb: np.ndarray, meta: dict) -> None:
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"P6\n")
        for key, val in meta.items():
            fh.write(f"# {key} {val}\n".encode("ascii"))
        fh.write(f"{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.astype(np.uint8).tobytes(order="C"))


def emit_heatmap(field, path) -> Path:
    """Render a scalar or flow field to a PNG (default) or PPM image.

    Scalar fields use the signed diverging map with min/max recorded in
    the image metadata; flow fields use the HSV encoding with the peak
    magnitude recorded.
    """
    path = Path(path)
    if isinstance(field, FlowField):
        rgb, vmin, vmax = flow_heatmap(field)
        meta = {"encoding": "flow_hsv", "magnitude_max": repr(vmax)}
    else:
        data = field.data if isinstance(field, ScalarField) else np.asarray(field, dtype=np.float64)
        rgb, vmin, vmax = scalar_heatmap(data)
        meta = {"encoding": "scalar_diverging", "field_min": repr(vmin), "field_max": repr(vmax)}
    if path.suffix.lower() == ".ppm":
        write_heatmap_ppm(path, rgb, meta)
    else:
        write_heatmap_png(path, rgb, meta)
    return path


def write_weight_bundle(dirpath, arrays: dict, meta: dict) -> None:
    """Serialize named float arrays to tensor files plus a JSON manifest."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    entries = {}
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype=np.float64)
        filename = f"{name}.pft"
        write_tensor(dirpath / filename, arr.reshape((1,) * (3 - arr.ndim) + arr.shape))
        entries[name] = {"file": filename, "shape": list(arr.shape)}
    manifest = {"arrays": entries, "meta": meta}
    (dirpath / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_weight_bundle(dirpath) -> tuple[dict, dict]:
    dirpath = Path(dirpath)
    manifest = json.loads((dirpath / "manifest.json").read_text())
    arrays = {}
    for name, entry in manifest["arrays"].items():
        stack = read_tensor(dirpath / entry["file"])
        arrays[name] = stack.reshape(entry["shape"])
    return arrays, manifest["meta"]


def write_json_report(path, report: dict) -> None:
    """Stable JSON encoding: sorted keys, 2-space indent, trailing newline."""
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
