"""Pass-through box filtering and voxel-grid downsampling.

The voxel grid follows h_k = floor((k - k_min) / r) with the origin at the
componentwise minimum of the input cloud, so cropping before downsampling
shifts voxel alignment. An explicit origin can be supplied when the same
binning must be reused across calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCloud
from .geometry import PointCloud

DEFAULT_VOXEL_MM = 3.0


@dataclass(frozen=True)
class AxisBox:
    """Axis-aligned box, min <= max componentwise. Millimeters."""

    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min_corner, dtype=np.float64)
        hi = np.asarray(self.max_corner, dtype=np.float64)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError("box corners must be 3-vectors")
        if not np.all(lo <= hi):
            raise ValueError("box min must be <= max componentwise")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return np.all((pts >= self.min_corner) & (pts <= self.max_corner), axis=1)


@dataclass(frozen=True)
class VoxelGridSpec:
    """Cubic grid of edge r anchored at origin (the input cloud's minimum)."""

    r: float
    origin: np.ndarray

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("voxel edge length must be > 0")
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64))


def voxel_index(p, spec: VoxelGridSpec) -> tuple[int, int, int]:
    """Raster index h_k = floor((p_k - origin_k) / r), exact floor semantics."""
    h = np.floor((np.asarray(p, dtype=np.float64) - spec.origin) / spec.r).astype(np.int64)
    return int(h[0]), int(h[1]), int(h[2])


def passthrough_filter(cloud: PointCloud, box: AxisBox) -> PointCloud:
    """Keep exactly the valid points inside the box; result is unorganized."""
    pts = cloud.valid_points()
    keep = box.contains(pts)
    sel = np.flatnonzero(keep)
    normals = curvatures = None
    if cloud.normals is not None:
        normals = cloud.normals[cloud.valid_indices()][sel]
    if cloud.curvatures is not None:
        curvatures = cloud.curvatures[cloud.valid_indices()][sel]
    return PointCloud(pts[sel], normals=normals, curvatures=curvatures)


def voxel_downsample(cloud: PointCloud, r: float, origin: np.ndarray | None = None) -> PointCloud:
    """One centroid per occupied voxel, ordered by (hx, hy, hz) lexicographic.

    Features are dropped: centroids are new points, so normals/curvatures must
    be re-estimated downstream.
    """
    if r <= 0:
        raise ValueError("voxel edge length must be > 0")
    pts = cloud.valid_points()
    if pts.shape[0] == 0:
        raise EmptyCloud("cannot downsample an empty cloud")
    if origin is None:
        origin = pts.min(axis=0)
    spec = VoxelGridSpec(r, origin)
    cells = np.floor((pts - spec.origin) / spec.r).astype(np.int64)
    # np.unique(axis=0) sorts rows lexicographically, which fixes output order
    uniq, inverse = np.unique(cells, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((uniq.shape[0], 3))
    np.add.at(sums, inverse, pts)
    counts = np.bincount(inverse, minlength=uniq.shape[0]).astype(np.float64)
    return PointCloud(sums / counts[:, None])
