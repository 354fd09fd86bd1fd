"""Command-line driver: gen / run / eval / sweep.

Exit codes for `run`: 0 with at least one seam, 2 when the pipeline finishes
with no seams (NoSeamsFound), 1 on any error. Log level comes from the
SEAMFORGE_LOG environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import SeamforgeError
from .evaluation import (
    match_seams,
    run_ablation,
    run_sweep,
    sweep_to_csv,
    sweep_to_json,
)
from .io_formats import read_scene, write_scene, write_weld_path
from .pipeline import PipelineConfig, run_on_bundle
from .synth import FIXTURE_SPECS, WorkpieceSpec, generate, read_truth, write_truth

log = logging.getLogger("seamforge")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_SEAMS = 2


def _setup_logging() -> None:
    level = os.environ.get("SEAMFORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="pipeline config JSON")
    p.add_argument("--voxel-size", type=float, dest="voxel_mm", help="voxel edge length, mm")
    p.add_argument("--passthrough", type=str,
                   help="camera-frame box: xmin,xmax,ymin,ymax,zmin,zmax (mm)")
    p.add_argument("--no-crop", action="store_true", help="bypass mask-based cropping")
    p.add_argument("--dilate-px", type=int, help="mask dilation radius, pixels")
    p.add_argument("--knn", type=int, dest="knn_k", help="feature neighborhood size")
    p.add_argument("--theta1-deg", type=float, help="region-growing angle threshold")
    p.add_argument("--curv-seed", type=float, help="seed-promotion curvature bound")
    p.add_argument("--min-segment", type=int, help="minimum segment size")
    p.add_argument("--step-mm", type=float, help="waypoint spacing, mm")
    p.add_argument("--line-tol", type=float, help="linear-fit RMS tolerance, mm")
    p.add_argument("--curve-tol", type=float, help="curved-fit RMS tolerance, mm")
    p.add_argument("--threads", type=int, help="worker threads for batch searches")


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    if args.config is not None:
        config = PipelineConfig.from_json(json.loads(Path(args.config).read_text()))
    else:
        config = PipelineConfig()
    overrides = {}
    for flag, field_name in (
        ("voxel_mm", "voxel_mm"),
        ("dilate_px", "dilate_px"),
        ("knn_k", "knn_k"),
        ("theta1_deg", "theta1_deg"),
        ("curv_seed", "curv_seed"),
        ("min_segment", "min_segment"),
        ("step_mm", "step_mm"),
        ("line_tol", "line_tol"),
        ("curve_tol", "curve_tol"),
        ("threads", "threads"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field_name] = value
    if getattr(args, "passthrough", None):
        parts = [float(v) for v in args.passthrough.split(",")]
        overrides["passthrough"] = tuple(parts)
    if getattr(args, "no_crop", False):
        overrides["crop_enabled"] = False
    return replace(config, **overrides) if overrides else config


def _cmd_gen(args: argparse.Namespace) -> int:
    if args.fixture:
        spec = FIXTURE_SPECS[args.fixture]
    else:
        spec = WorkpieceSpec.from_json(json.loads(Path(args.spec).read_text()))
    bundle, truth = generate(spec)
    out = Path(args.out)
    manifest = write_scene(bundle, out)
    write_truth(truth, out / "truth.json")
    (out / "workpiece.json").write_text(json.dumps(spec.to_json(), indent=2) + "\n")
    print(f"wrote {manifest} ({bundle.cloud.n_valid} points, {len(truth.seams)} seams)")
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    bundle = read_scene(args.scene)
    result = run_on_bundle(bundle, config)
    write_weld_path(result.paths, args.out)
    if args.report:
        Path(args.report).write_text(json.dumps(result.report_json(), indent=2) + "\n")
    for stage, secs in result.timings_s.items():
        log.info("stage %-11s %.3f s", stage, secs)
    if result.n_seams == 0:
        reason = result.diagnostics.get("reason", "no seams found")
        print(f"no seams found: {reason}", file=sys.stderr)
        return EXIT_NO_SEAMS
    print(f"wrote {args.out} ({result.n_seams} seams)")
    return EXIT_OK


def _scene_dir_inputs(scene_dir: Path):
    manifest = scene_dir / "scene.json" if scene_dir.is_dir() else scene_dir
    bundle = read_scene(manifest)
    truth = read_truth(manifest.parent / "truth.json")
    return bundle, truth


def _parse_range(text: str) -> list[float]:
    if ":" in text:
        lo, hi = text.split(":", 1)
        return [float(v) for v in range(int(lo), int(hi) + 1)]
    return [float(v) for v in text.split(",")]


def _cmd_eval(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    bundle, truth = _scene_dir_inputs(Path(args.scene))
    if args.sweep:
        return _run_sweep(bundle, truth, _parse_range(args.sweep), config, args)

    if args.ablation:
        with_crop, without_crop = run_ablation(bundle, truth, config)
        doc = {"with_crop": with_crop.to_json(), "without_crop": without_crop.to_json()}
        print(
            f"with crop: {with_crop.counts.get('downsampled')} points, "
            f"{with_crop.compute_time_s():.2f} s, rmse {with_crop.scene_rmse():.3f} mm"
        )
        print(
            f"without crop: {without_crop.counts.get('downsampled')} points, "
            f"{without_crop.compute_time_s():.2f} s, rmse {without_crop.scene_rmse():.3f} mm"
        )
    else:
        result = run_on_bundle(bundle, config)
        report = match_seams(result.paths, truth)
        report.counts = dict(result.counts)
        report.timings_s = dict(result.timings_s)
        doc = report.to_json()
        print(
            f"matched {report.matched}/{len(truth.seams)} seams, "
            f"rmse {report.scene_rmse():.3f} mm, max {report.max_error():.3f} mm"
        )
    if args.report:
        Path(args.report).write_text(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def _run_sweep(bundle, truth, r_values, config, args) -> int:
    rows = run_sweep(bundle, truth, r_values, config)
    for row in rows:
        status = "FAILED" if row.failed else "ok"
        print(
            f"r={row.r_mm:4.1f} mm  points={row.points:6d}  rmse={row.rmse_mm:7.3f} mm  "
            f"max={row.max_mm:7.3f} mm  matched={row.matched}/{row.detected}  {status}"
        )
    if args.csv:
        sweep_to_csv(rows, args.csv)
    if args.report:
        sweep_to_json(rows, args.report)
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    args.sweep = args.r
    args.ablation = False
    return _cmd_eval(args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seamforge",
                                     description="coarse-to-fine weld seam extraction")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic benchmark scene")
    src = p_gen.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", type=Path, help="workpiece spec JSON")
    src.add_argument("--fixture", choices=sorted(FIXTURE_SPECS), help="named fixture preset")
    p_gen.add_argument("--out", type=Path, required=True, help="output scene directory")
    p_gen.set_defaults(func=_cmd_gen)

    p_run = sub.add_parser("run", help="run the pipeline on a scene manifest")
    p_run.add_argument("--scene", type=Path, required=True, help="scene manifest JSON")
    p_run.add_argument("--out", type=Path, required=True, help="weld path JSON output")
    p_run.add_argument("--report", type=Path, help="pipeline report JSON output")
    _add_pipeline_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_eval = sub.add_parser("eval", help="evaluate against ground truth")
    p_eval.add_argument("--scene", type=Path, required=True,
                        help="scene directory (scene.json + truth.json)")
    p_eval.add_argument("--report", type=Path, help="report JSON output")
    p_eval.add_argument("--csv", type=Path, help="sweep CSV output")
    p_eval.add_argument("--ablation", action="store_true", help="crop on/off comparison")
    p_eval.add_argument("--sweep", type=str, help="voxel sweep range, e.g. 1:10")
    _add_pipeline_flags(p_eval)
    p_eval.set_defaults(func=_cmd_eval)

    p_sweep = sub.add_parser("sweep", help="voxel-size sweep")
    p_sweep.add_argument("--scene", type=Path, required=True)
    p_sweep.add_argument("--r", type=str, default="1:10", help="range a:b or comma list")
    p_sweep.add_argument("--report", type=Path, help="sweep JSON output")
    p_sweep.add_argument("--csv", type=Path, help="sweep CSV output")
    _add_pipeline_flags(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SeamforgeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
