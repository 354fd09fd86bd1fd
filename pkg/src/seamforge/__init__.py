"""Coarse-to-fine multi weld-seam extraction from RGB-D scans."""

from .errors import (
    ConfigError,
    DegenerateGeometry,
    DegenerateNeighborhood,
    DimensionMismatch,
    EmptyCloud,
    FitRejected,
    GimbalLockWarning,
    InvalidSpec,
    InvalidTransform,
    IoError,
    MissingCorrespondence,
    MissingFeatures,
    NoSeamsFound,
    ParseError,
    SeamforgeError,
    TooFewMasks,
    UnmatchedSeam,
    UnsupportedFormat,
)
from .geometry import (
    CameraIntrinsics,
    OrientationWPR,
    PointCloud,
    RigidTransform,
    apply_transform,
    compose,
    invert,
    rotation_to_wpr,
    wpr_to_rotation,
)
from .pipeline import PipelineConfig, PipelineResult, run_on_bundle

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics",
    "ConfigError",
    "DegenerateGeometry",
    "DegenerateNeighborhood",
    "DimensionMismatch",
    "EmptyCloud",
    "FitRejected",
    "GimbalLockWarning",
    "InvalidSpec",
    "InvalidTransform",
    "IoError",
    "MissingCorrespondence",
    "MissingFeatures",
    "NoSeamsFound",
    "OrientationWPR",
    "ParseError",
    "PipelineConfig",
    "PipelineResult",
    "PointCloud",
    "RigidTransform",
    "SeamforgeError",
    "TooFewMasks",
    "UnmatchedSeam",
    "UnsupportedFormat",
    "apply_transform",
    "compose",
    "invert",
    "rotation_to_wpr",
    "run_on_bundle",
    "wpr_to_rotation",
]
