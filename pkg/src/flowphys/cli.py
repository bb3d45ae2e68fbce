"""Command-line entry point: evaluate, synth, heatmap, selftest subcommands.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 internal numeric error (including failed selftest checks).
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, dataio, diffops, metrics, synth
from .errors import ConfigError, DataError, FlowPhysError, NumericError
from .fields import FrameSequence
from .flow import FlowParams, farneback_flow
from .selftest import run_selftest

HEATMAP_FIELDS = ("vorticity", "divergence", "stream_function", "q_criterion", "flow")

_FLOW_FLAG_TYPES = {
    "pyramid_scale": float,
    "levels": int,
    "window_size": int,
    "iterations": int,
    "poly_n": int,
    "poly_sigma": float,
}


@dataclass
class RunConfig:
    """Evaluate-run settings; flags and the JSON config file mirror these."""

    real_path: str
    gen_path: str
    pyramid_scale: float = 0.5
    levels: int = 4
    window_size: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.1
    ssim_mode: str = "global"
    se_components: str = "both"
    border_margin: int = 0
    output: str = "report.json"
    csv_path: str | None = None
    emit_heatmaps: bool = False
    heatmap_fields: tuple = ("vorticity",)
    heatmap_dir: str | None = None
    workers: int | None = None

    def flow_params(self) -> FlowParams:
        return FlowParams(
            pyramid_scale=self.pyramid_scale,
            levels=self.levels,
            window_size=self.window_size,
            iterations=self.iterations,
            poly_n=self.poly_n,
            poly_sigma=self.poly_sigma,
        )


def _color(text: str, code: str) -> str:
    if os.environ.get("NO_COLOR") or not sys.stdout.isatty():
        return text
    return f"\x1b[{code}m{text}\x1b[0m"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowphys",
        description="Physics-consistency metrics for frame sequences via dense optical flow.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="compute all metrics for a real/gen sequence pair")
    ev.add_argument("--real", dest="real_path", help="real sequence (image dir or tensor file)")
    ev.add_argument("--gen", dest="gen_path", help="generated sequence (image dir or tensor file)")
    ev.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    for name, typ in _FLOW_FLAG_TYPES.items():
        ev.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, default=None)
    ev.add_argument("--ssim-mode", dest="ssim_mode", choices=["global", "windowed"], default=None)
    ev.add_argument(
        "--se-components", dest="se_components", choices=["both", "u_only"], default=None
    )
    ev.add_argument("--border-margin", dest="border_margin", type=int, default=None)
    ev.add_argument("--output", default=None, help="report path (default report.json)")
    ev.add_argument("--csv", dest="csv_path", default=None, help="append a metrics row here")
    ev.add_argument(
        "--emit-heatmaps", dest="emit_heatmaps", action="store_true", default=None
    )
    ev.add_argument(
        "--heatmap-fields",
        dest="heatmap_fields",
        default=None,
        help=f"comma-separated subset of {{{','.join(HEATMAP_FIELDS)}}}",
    )
    ev.add_argument("--heatmap-dir", dest="heatmap_dir", default=None)
    ev.add_argument("--workers", type=int, default=None, help="flow workers (default: cores)")

    sy = sub.add_parser("synth", help="render an analytic-flow benchmark sequence")
    sy.add_argument("--kind", required=True, choices=["translation", "rotation", "taylor_green"])
    sy.add_argument("--out", required=True, help="output directory")
    sy.add_argument("--width", type=int, default=64)
    sy.add_argument("--height", type=int, default=64)
    sy.add_argument("--frames", type=int, default=8)
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--dx", type=float, default=3.0, help="translation x displacement")
    sy.add_argument("--dy", type=float, default=1.0, help="translation y displacement")
    sy.add_argument("--omega", type=float, default=0.05, help="rotation rate, radians/frame")
    sy.add_argument("--amplitude", type=float, default=1.0, help="vortex lattice amplitude")
    sy.add_argument("--format", choices=["pgm", "tensor"], default="pgm")

    hm = sub.add_parser("heatmap", help="render a derived field of one frame pair")
    hm.add_argument("--input", required=True, help="sequence (image dir or tensor file)")
    hm.add_argument("--field", required=True, choices=HEATMAP_FIELDS)
    hm.add_argument("--pair", type=int, default=0, help="frame pair index (flow t -> t+1)")
    hm.add_argument("--out", required=True, help="output image (.png or .ppm)")
    for name, typ in _FLOW_FLAG_TYPES.items():
        hm.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, default=None)

    st = sub.add_parser("selftest", help="run the built-in oracle suite")
    st.add_argument("--timings", action="store_true", help="print per-check wall time")
    return parser


def _merge_config(args: argparse.Namespace) -> RunConfig:
    base: dict = {}
    if args.config:
        cfg_path = Path(args.config)
        if not cfg_path.is_file():
            raise ConfigError(f"config file does not exist: {cfg_path}")
        try:
            loaded = json.loads(cfg_path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {cfg_path} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {cfg_path} must hold a JSON object")
        valid = set(RunConfig.__dataclass_fields__)
        for key in loaded:
            if key not in valid:
                raise ConfigError(f"unknown config key {key!r}")
        base.update(loaded)

    for name in RunConfig.__dataclass_fields__:
        val = getattr(args, name, None)
        if val is not None:
            base[name] = val

    if isinstance(base.get("heatmap_fields"), str):
        base["heatmap_fields"] = tuple(
            f.strip() for f in base["heatmap_fields"].split(",") if f.strip()
        )
    for field_name in base.get("heatmap_fields", ()):
        if field_name not in HEATMAP_FIELDS:
            raise ConfigError(f"unknown heatmap field {field_name!r}")

    if "real_path" not in base or "gen_path" not in base:
        raise ConfigError("evaluate needs --real and --gen (or config file equivalents)")
    return RunConfig(**base)


def _require_sequence_path(path_str: str, what: str) -> Path:
    path = Path(path_str)
    if not path.exists():
        raise ConfigError(f"{what} does not exist: {path}")
    return path


def _metric_row(report: dict) -> list:
    vals = report["metrics"]
    return [vals[k] for k in ("rmse", "ssim", "sfe", "se", "gs", "cs", "qce", "ve")]


def run_evaluate(cfg: RunConfig) -> dict:
    real_path = _require_sequence_path(cfg.real_path, "real_path")
    gen_path = _require_sequence_path(cfg.gen_path, "gen_path")
    real = dataio.load_sequence(real_path)
    gen = dataio.load_sequence(gen_path)
    workers = cfg.workers if cfg.workers else (os.cpu_count() or 1)

    result = metrics.evaluate_all(
        real,
        gen,
        cfg.flow_params(),
        ssim_mode=cfg.ssim_mode,
        se_components=cfg.se_components,
        border_margin=cfg.border_margin,
        workers=workers,
    )
    report = {
        "schema_version": 1,
        "tool_version": __version__,
        "inputs": {
            "real": {
                "name": real_path.name,
                "sha256": dataio.sequence_digest(real),
                "frames": len(real),
            },
            "gen": {
                "name": gen_path.name,
                "sha256": dataio.sequence_digest(gen),
                "frames": len(gen),
            },
        },
        **result.to_dict(),
    }
    dataio.write_json_report(cfg.output, report)

    if cfg.csv_path:
        csv_path = Path(cfg.csv_path)
        new_file = not csv_path.exists()
        with open(csv_path, "a", newline="") as fh:
            writer = csv.writer(fh)
            if new_file:
                writer.writerow(
                    ["real", "gen", "rmse", "ssim", "sfe", "se", "gs", "cs", "qce", "ve"]
                )
            writer.writerow([real_path.name, gen_path.name] + _metric_row(report))

    if cfg.emit_heatmaps:
        _write_heatmaps(cfg, gen)
    return report


def _flow_for_pair(seq: FrameSequence, pair: int, params: FlowParams):
    if not 0 <= pair < len(seq) - 1:
        raise ConfigError(f"pair index {pair} out of range for {len(seq)} frames")
    return farneback_flow(seq[pair], seq[pair + 1], params)


def _derived_field(flow, field_name: str):
    if field_name == "flow":
        return flow
    fn = {
        "vorticity": diffops.vorticity,
        "divergence": diffops.divergence,
        "stream_function": diffops.stream_function,
        "q_criterion": diffops.q_criterion,
    }[field_name]
    return fn(flow)


def _write_heatmaps(cfg: RunConfig, gen: FrameSequence) -> None:
    out_dir = Path(cfg.heatmap_dir) if cfg.heatmap_dir else Path(cfg.output).parent / "heatmaps"
    out_dir.mkdir(parents=True, exist_ok=True)
    pair = (len(gen) - 1) // 2
    flow = _flow_for_pair(gen, pair, cfg.flow_params())
    for field_name in cfg.heatmap_fields:
        path = out_dir / f"{field_name}_pair{pair:03d}.png"
        dataio.emit_heatmap(_derived_field(flow, field_name), path)
        print(f"wrote {path}")


def run_synth(args: argparse.Namespace) -> None:
    grid = synth.GridSpec(args.width, args.height, centered=True)
    sidecar: dict = {
        "kind": args.kind,
        "width": args.width,
        "height": args.height,
        "frames": args.frames,
        "seed": args.seed,
        "format": args.format,
    }
    if args.kind == "translation":
        flow = synth.uniform_flow(grid, args.dx, args.dy)
        sidecar["dx"] = args.dx
        sidecar["dy"] = args.dy
    elif args.kind == "rotation":
        flow = synth.rigid_rotation_flow(grid, args.omega)
        sidecar["omega"] = args.omega
        sidecar["vorticity_analytic"] = 2.0 * args.omega
        sidecar["q_criterion_analytic"] = args.omega**2
    else:
        flow = synth.taylor_green_flow(grid, args.amplitude)
        sidecar["amplitude"] = args.amplitude
        sidecar["wavenumber"] = 2.0 * np.pi / args.width
    seq = synth.render_advected_sequence(grid, flow, args.frames, args.seed)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.format == "pgm":
        paths = dataio.save_sequence_pgm(out_dir, seq)
        sidecar["files"] = [p.name for p in paths]
    else:
        tensor_path = out_dir / "frames.pft"
        dataio.write_tensor(tensor_path, seq.as_array())
        sidecar["files"] = [tensor_path.name]
    dataio.write_json_report(out_dir / "synth.json", sidecar)
    print(f"wrote {len(seq)} frames to {out_dir}")


def run_heatmap(args: argparse.Namespace) -> None:
    seq = dataio.load_sequence(_require_sequence_path(args.input, "input"))
    overrides = {
        k: getattr(args, k) for k in _FLOW_FLAG_TYPES if getattr(args, k, None) is not None
    }
    params = FlowParams(**{**FlowParams().to_dict(), **overrides})
    flow = _flow_for_pair(seq, args.pair, params)
    dataio.emit_heatmap(_derived_field(flow, args.field), args.out)
    print(f"wrote {args.out}")


def run_selftest_cmd(args: argparse.Namespace) -> int:
    import time

    results = []
    start_all = time.perf_counter()
    for name, ok, detail in run_selftest():
        results.append(ok)
        tag = _color("PASS", "32") if ok else _color("FAIL", "31")
        print(f"{tag} {name}: {detail}")
    took = time.perf_counter() - start_all
    failed = results.count(False)
    if args.timings:
        print(f"total {took:.2f}s")
    if failed:
        print(f"{failed}/{len(results)} checks failed")
        return 4
    print(f"all {len(results)} checks passed")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "evaluate":
            cfg = _merge_config(args)
            report = run_evaluate(cfg)
            vals = report["metrics"]
            summary = "  ".join(f"{k}={vals[k]:.6g}" for k in ("rmse", "ssim", "sfe", "se"))
            print(f"wrote {cfg.output}  ({summary} ...)")
        elif args.command == "synth":
            run_synth(args)
        elif args.command == "heatmap":
            run_heatmap(args)
        elif args.command == "selftest":
            return run_selftest_cmd(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NumericError, FlowPhysError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
