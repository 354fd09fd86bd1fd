"""End-to-end pipeline: scene bundle in, world-frame weld paths out.

Stage order: crop (when masks are present and enabled) -> pass-through ->
voxel downsample -> KD-tree -> features -> region growing -> edge refinement
-> per-seam fit/pose -> world transform. Stage wall-clock timings exclude all
file I/O; the fixed stage names keep efficiency comparisons stable.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import coarse_crop, edge_extract, features, path_fit, preprocess, region_grow, spatial
from .errors import ConfigError, FitRejected
from .geometry import PointCloud
from .io_formats import SceneBundle
from .preprocess import AxisBox
from .region_grow import GrowthParams

log = logging.getLogger("seamforge")

STAGES = ("crop", "passthrough", "downsample", "features", "grow", "refine", "fit")


@dataclass(frozen=True)
class PipelineConfig:
    voxel_mm: float = preprocess.DEFAULT_VOXEL_MM
    passthrough: tuple[float, float, float, float, float, float] | None = None
    crop_enabled: bool = True
    dilate_px: int = coarse_crop.DEFAULT_DILATE_PX
    knn_k: int = features.DEFAULT_K
    theta1_deg: float = 20.0
    curv_seed: float = 0.01
    k_grow: int = 10
    min_segment: int = 50
    refine_k: int = edge_extract.DEFAULT_REFINE_K
    m_min: int = edge_extract.DEFAULT_M_MIN
    link_r_factor: float = edge_extract.LINK_R_FACTOR
    min_seam_points: int = edge_extract.DEFAULT_MIN_SEAM_POINTS
    line_tol: float = path_fit.DEFAULT_LINE_TOL
    curve_tol: float = path_fit.DEFAULT_CURVE_TOL
    step_mm: float = path_fit.DEFAULT_STEP_MM
    threads: int = 1

    def __post_init__(self):
        if self.voxel_mm <= 0:
            raise ConfigError("voxel_mm must be > 0")
        if self.dilate_px < 0:
            raise ConfigError("dilate_px must be >= 0")
        if self.step_mm <= 0:
            raise ConfigError("step_mm must be > 0")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.passthrough is not None and len(self.passthrough) != 6:
            raise ConfigError("passthrough must be [xmin, xmax, ymin, ymax, zmin, zmax]")
        # growth parameter ranges are validated by GrowthParams
        self.growth_params()

    def growth_params(self) -> GrowthParams:
        try:
            return GrowthParams(
                theta1_deg=self.theta1_deg,
                c2=self.curv_seed,
                k_grow=self.k_grow,
                min_segment_size=self.min_segment,
            )
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def passthrough_box(self) -> AxisBox | None:
        if self.passthrough is None:
            return None
        x0, x1, y0, y1, z0, z1 = self.passthrough
        return AxisBox(np.array([x0, y0, z0]), np.array([x1, y1, z1]))

    def to_json(self) -> dict:
        doc = {}
        for f in fields(self):
            v = getattr(self, f.name)
            doc[f.name] = list(v) if isinstance(v, tuple) else v
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "PipelineConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in doc:
            if key not in known:
                raise ConfigError(f"unknown config key '{key}'")
        kwargs = dict(doc)
        if kwargs.get("passthrough") is not None:
            kwargs["passthrough"] = tuple(float(v) for v in kwargs["passthrough"])
        try:
            return cls(**kwargs)
        except TypeError as e:
            raise ConfigError(str(e)) from e


@dataclass
class PipelineResult:
    paths: list[path_fit.WeldPath] = field(default_factory=list)  # world frame
    camera_paths: list[path_fit.WeldPath] = field(default_factory=list)
    counts: dict = field(default_factory=dict)
    timings_s: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_seams(self) -> int:
        return len(self.paths)

    def compute_time_s(self) -> float:
        return float(sum(self.timings_s.values()))

    def report_json(self) -> dict:
        return {
            "seams": self.n_seams,
            "counts": self.counts,
            "timings_s": self.timings_s,
            "diagnostics": self.diagnostics,
        }


def run_on_bundle(bundle: SceneBundle, config: PipelineConfig) -> PipelineResult:
    """Run the full pipeline in memory. Zero seams is a result, not an error."""
    result = PipelineResult()
    counts = result.counts
    timings = result.timings_s
    for stage in STAGES:
        timings[stage] = 0.0
    counts["raw"] = bundle.cloud.n_valid

    working: PointCloud = bundle.cloud
    t0 = time.perf_counter()
    if config.crop_enabled and len(bundle.masks) >= 2:
        roi = coarse_crop.build_seam_roi(bundle.masks, config.dilate_px)
        working = coarse_crop.crop_cloud(working, roi, bundle.intrinsics)
        counts["roi_pairs"] = len(roi.source_pairs)
    timings["crop"] = time.perf_counter() - t0
    counts["after_crop"] = working.n_valid
    if working.n_valid == 0:
        result.diagnostics["reason"] = "crop produced an empty cloud (empty ROI)"
        return result

    t0 = time.perf_counter()
    box = config.passthrough_box()
    if box is not None:
        working = preprocess.passthrough_filter(working, box)
    timings["passthrough"] = time.perf_counter() - t0
    counts["after_passthrough"] = working.n_valid
    if working.n_valid == 0:
        result.diagnostics["reason"] = "pass-through filter removed every point"
        return result

    t0 = time.perf_counter()
    working = preprocess.voxel_downsample(working, config.voxel_mm)
    timings["downsample"] = time.perf_counter() - t0
    counts["downsampled"] = working.n_valid

    if working.n_valid < max(3, config.knn_k, config.k_grow):
        result.diagnostics["reason"] = (
            f"only {working.n_valid} points after downsampling; too few for features"
        )
        return result

    t0 = time.perf_counter()
    tree = spatial.build(working)
    working = features.estimate_features(working, tree, config.knn_k, workers=config.threads)
    timings["features"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    seg = region_grow.segment(working, tree, config.growth_params(), workers=config.threads)
    timings["grow"] = time.perf_counter() - t0
    counts["segments"] = seg.n_segments()

    t0 = time.perf_counter()
    seams, diag = edge_extract.refine_edges(
        seg,
        working,
        tree,
        k=config.refine_k,
        m_min=config.m_min,
        link_r=config.link_r_factor * config.voxel_mm,
        min_seam_points=config.min_seam_points,
        workers=config.threads,
    )
    timings["refine"] = time.perf_counter() - t0
    result.diagnostics.update(diag)
    counts["edge_candidates"] = diag["candidates"]
    counts["refined_edge_points"] = diag["refined"]

    if not seams:
        result.diagnostics.setdefault("reason", "no seam point sets survived refinement")
        return result

    mean_normals = {s.segment_id: s.mean_normal for s in seg.segments}
    t0 = time.perf_counter()
    rejected = []
    for seam in seams:
        try:
            cam_path = path_fit.seam_to_path(
                seam.indices,
                working,
                tree,
                seg.labels,
                seam.segment_pair,
                mean_normals,
                step=config.step_mm,
                line_tol=config.line_tol,
                curve_tol=config.curve_tol,
            )
        except FitRejected as e:
            rejected.append({"pair": list(seam.segment_pair), "error": str(e)})
            continue
        result.camera_paths.append(cam_path)
        result.paths.append(
            path_fit.to_world(cam_path, bundle.tool_from_camera, bundle.world_from_tool)
        )
    timings["fit"] = time.perf_counter() - t0
    if rejected:
        result.diagnostics["rejected_fits"] = rejected
    if not result.paths:
        result.diagnostics.setdefault("reason", "every seam fit was rejected")
    log.info(
        "pipeline: %d seams from %d raw points (%.3f s compute)",
        result.n_seams, counts["raw"], result.compute_time_s(),
    )
    return result


def with_crop_disabled(config: PipelineConfig) -> PipelineConfig:
    return replace(config, crop_enabled=False)
