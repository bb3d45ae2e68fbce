"""Regenerate the committed test fixtures.

Run from the repository root after any change that intentionally alters
numeric output, then inspect the diff:

    python3 scripts/make_fixtures.py

Produces, under tests/data/:
  - benchmark_config.json   evaluation settings for the bundled benchmark
  - golden_report.json      bit-exact expected report for that benchmark
  - taylor_green_psi.png    diverging heatmap of the analytic stream function
"""
import json
import sys
import tempfile
from pathlib import Path

from flowphys import dataio, synth
from flowphys.cli import main

DATA_DIR = Path(__file__).resolve().parent.parent / "tests" / "data"

BENCHMARK = {
    "width": 64,
    "height": 64,
    "frames": 8,
    "seed": 7,
    "real_omega": 0.05,
    "gen_omega": 0.03,
}

CONFIG = {
    "ssim_mode": "global",
    "se_components": "both",
    "border_margin": 0,
    "workers": 1,
}


def synth_args(out_dir: Path, omega: float) -> list:
    return [
        "synth", "--kind", "rotation",
        "--omega", str(omega),
        "--width", str(BENCHMARK["width"]),
        "--height", str(BENCHMARK["height"]),
        "--frames", str(BENCHMARK["frames"]),
        "--seed", str(BENCHMARK["seed"]),
        "--out", str(out_dir),
    ]


def make_golden_report(tmp: Path) -> None:
    real_dir = tmp / "real_bench"
    gen_dir = tmp / "gen_bench"
    assert main(synth_args(real_dir, BENCHMARK["real_omega"])) == 0
    assert main(synth_args(gen_dir, BENCHMARK["gen_omega"])) == 0

    cfg_path = DATA_DIR / "benchmark_config.json"
    cfg_path.write_text(json.dumps(CONFIG, indent=2, sort_keys=True) + "\n")

    report_path = DATA_DIR / "golden_report.json"
    rc = main([
        "evaluate",
        "--real", str(real_dir),
        "--gen", str(gen_dir),
        "--config", str(cfg_path),
        "--output", str(report_path),
    ])
    assert rc == 0, f"evaluate exited {rc}"
    print(f"wrote {report_path}")


def make_taylor_green_heatmap() -> None:
    grid = synth.GridSpec(128, 128, centered=False)
    psi = synth.taylor_green_stream(grid)
    out = dataio.emit_heatmap(psi, DATA_DIR / "taylor_green_psi.png")
    print(f"wrote {out}")


def main_fixtures() -> int:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        make_golden_report(Path(tmp))
    make_taylor_green_heatmap()
    return 0


if __name__ == "__main__":
    sys.exit(main_fixtures())
