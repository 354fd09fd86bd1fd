"""Accuracy metrics and the two benchmark protocols (voxel sweep, crop ablation).

Path accuracy is RMSE = sqrt(mean over waypoints of squared 3D deviation),
where each waypoint's reference is its nearest point on the matched
ground-truth curve. Detected seams are assigned to truth curves one-to-one,
greedily by ascending directed Hausdorff distance, within a match radius.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import IoError, UnmatchedSeam
from .io_formats import SceneBundle
from .path_fit import WeldPath
from .pipeline import PipelineConfig, PipelineResult, run_on_bundle, with_crop_disabled
from .synth import GroundTruth, TruthSeam

log = logging.getLogger("seamforge")

DEFAULT_MATCH_RADIUS_MM = 5.0


def _waypoint_positions(path: WeldPath) -> np.ndarray:
    return np.vstack([wp.position for wp in path.waypoints])


def rmse(positions: np.ndarray, seam: TruthSeam) -> tuple[float, float]:
    """(RMSE, max error) of waypoint positions against one truth curve."""
    pts = np.asarray(positions, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[0] < 1:
        raise ValueError("need at least one waypoint")
    d = np.array([seam.distance(p) for p in pts])
    return float(np.sqrt(np.mean(d**2))), float(d.max())


def hausdorff_to_seam(positions: np.ndarray, seam: TruthSeam) -> float:
    """Directed Hausdorff: worst waypoint deviation from the curve."""
    return max(seam.distance(p) for p in np.asarray(positions, dtype=np.float64))


@dataclass
class SeamMatch:
    path_index: int
    truth_index: int
    rmse_mm: float
    max_mm: float
    n_waypoints: int


@dataclass
class EvalReport:
    matches: list[SeamMatch] = field(default_factory=list)
    missed: list[int] = field(default_factory=list)  # truth indices
    spurious: list[int] = field(default_factory=list)  # path indices
    counts: dict = field(default_factory=dict)
    timings_s: dict = field(default_factory=dict)

    @property
    def matched(self) -> int:
        return len(self.matches)

    def scene_rmse(self) -> float:
        """Pooled over all matched waypoints (single Eq.-style aggregate)."""
        if not self.matches:
            return float("nan")
        sq = sum(m.rmse_mm**2 * m.n_waypoints for m in self.matches)
        n = sum(m.n_waypoints for m in self.matches)
        return float(np.sqrt(sq / n))

    def max_error(self) -> float:
        if not self.matches:
            return float("nan")
        return max(m.max_mm for m in self.matches)

    def mean_seam_rmse(self) -> float:
        if not self.matches:
            return float("nan")
        return float(np.mean([m.rmse_mm for m in self.matches]))

    def compute_time_s(self) -> float:
        return float(sum(self.timings_s.values()))

    def to_json(self) -> dict:
        return {
            "matched": self.matched,
            "missed": self.missed,
            "spurious": self.spurious,
            "scene_rmse_mm": self.scene_rmse(),
            "max_error_mm": self.max_error(),
            "per_seam": [
                {
                    "path": m.path_index,
                    "truth": m.truth_index,
                    "rmse_mm": m.rmse_mm,
                    "max_mm": m.max_mm,
                    "waypoints": m.n_waypoints,
                }
                for m in self.matches
            ],
            "counts": self.counts,
            "timings_s": self.timings_s,
        }


def match_seams(
    paths: list[WeldPath],
    truth: GroundTruth,
    match_radius: float = DEFAULT_MATCH_RADIUS_MM,
) -> EvalReport:
    """Greedy one-to-one assignment by ascending Hausdorff distance."""
    report = EvalReport()
    candidates = []
    positions = [_waypoint_positions(p) for p in paths]
    for i, pos in enumerate(positions):
        for j, seam in enumerate(truth.seams):
            h = hausdorff_to_seam(pos, seam)
            if h <= match_radius:
                candidates.append((h, i, j))
    candidates.sort()
    used_paths: set[int] = set()
    used_truth: set[int] = set()
    for h, i, j in candidates:
        if i in used_paths or j in used_truth:
            continue
        used_paths.add(i)
        used_truth.add(j)
        r, mx = rmse(positions[i], truth.seams[j])
        report.matches.append(
            SeamMatch(path_index=i, truth_index=j, rmse_mm=r, max_mm=mx, n_waypoints=positions[i].shape[0])
        )
    report.matches.sort(key=lambda m: m.truth_index)
    report.missed = [j for j in range(len(truth.seams)) if j not in used_truth]
    report.spurious = [i for i in range(len(paths)) if i not in used_paths]
    return report


def rmse_for_path(path: WeldPath, truth: GroundTruth, match_radius: float = DEFAULT_MATCH_RADIUS_MM) -> float:
    """RMSE of one path against its nearest truth curve; UnmatchedSeam beyond radius."""
    pos = _waypoint_positions(path)
    best = None
    for seam in truth.seams:
        h = hausdorff_to_seam(pos, seam)
        if best is None or h < best[0]:
            best = (h, seam)
    if best is None or best[0] > match_radius:
        raise UnmatchedSeam(f"no ground-truth curve within {match_radius} mm")
    return rmse(pos, best[1])[0]


def evaluate_scene(
    bundle: SceneBundle,
    truth: GroundTruth,
    config: PipelineConfig,
    match_radius: float = DEFAULT_MATCH_RADIUS_MM,
) -> tuple[EvalReport, PipelineResult]:
    result = run_on_bundle(bundle, config)
    report = match_seams(result.paths, truth, match_radius)
    report.counts = dict(result.counts)
    report.timings_s = dict(result.timings_s)
    return report, result


@dataclass
class SweepRow:
    r_mm: float
    points: int
    rmse_mm: float
    max_mm: float
    detected: int
    matched: int
    failed: bool = False
    error: str = ""


def run_sweep(
    bundle: SceneBundle,
    truth: GroundTruth,
    r_values: list[float],
    config: PipelineConfig,
    match_radius: float = DEFAULT_MATCH_RADIUS_MM,
) -> list[SweepRow]:
    """Full pipeline once per voxel size; failed rows are marked, not fatal."""
    rows = []
    for r in sorted(r_values):
        cfg = replace(config, voxel_mm=float(r))
        try:
            report, result = evaluate_scene(bundle, truth, cfg, match_radius)
        except Exception as e:  # a failed row must not abort the sweep
            rows.append(SweepRow(float(r), 0, float("nan"), float("nan"), 0, 0, True, str(e)))
            continue
        row = SweepRow(
            r_mm=float(r),
            points=int(report.counts.get("downsampled", 0)),
            rmse_mm=report.scene_rmse(),
            max_mm=report.max_error(),
            detected=result.n_seams,
            matched=report.matched,
            failed=report.matched == 0,
        )
        rows.append(row)
        log.info(
            "sweep r=%.1f: %d points, rmse=%.3f mm, max=%.3f mm",
            row.r_mm, row.points, row.rmse_mm, row.max_mm,
        )
    return rows


def sweep_to_csv(rows: list[SweepRow], path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r_mm", "points", "rmse_mm", "max_mm", "detected", "matched", "failed"])
            for row in rows:
                writer.writerow(
                    [row.r_mm, row.points, f"{row.rmse_mm:.6f}", f"{row.max_mm:.6f}",
                     row.detected, row.matched, int(row.failed)]
                )
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def sweep_to_json(rows: list[SweepRow], path) -> None:
    doc = [
        {
            "r_mm": r.r_mm, "points": r.points, "rmse_mm": r.rmse_mm,
            "max_mm": r.max_mm, "detected": r.detected, "matched": r.matched,
            "failed": r.failed, "error": r.error,
        }
        for r in rows
    ]
    try:
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def run_ablation(
    bundle: SceneBundle,
    truth: GroundTruth,
    config: PipelineConfig,
    match_radius: float = DEFAULT_MATCH_RADIUS_MM,
) -> tuple[EvalReport, EvalReport]:
    """(with crop, without crop) under identical downstream parameters."""
    with_crop, _ = evaluate_scene(bundle, truth, config, match_radius)
    without_crop, _ = evaluate_scene(bundle, truth, with_crop_disabled(config), match_radius)
    return with_crop, without_crop
