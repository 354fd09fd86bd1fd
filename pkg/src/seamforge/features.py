"""Per-point surface features from neighborhood covariance eigendecomposition.

For each point, the covariance of its k nearest neighbors (the point itself
included) yields eigenvalues l0 <= l1 <= l2. The curvature proxy
delta = l0 / (l0 + l1 + l2) is 0 on planes and at most 1/3 for isotropic
scatter; the normal is the eigenvector of l0, sign-flipped to face the camera
origin (the cloud is in camera frame at this stage).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateNeighborhood
from .geometry import PointCloud
from .spatial import KdTree

DEFAULT_K = 30
_DEGENERATE_TRACE = 1e-18


@dataclass(frozen=True)
class LocalSurfaceStats:
    normal: np.ndarray  # unit vector
    curvature: float  # delta in [0, 1/3]
    k: int


def points_covariance(points: np.ndarray) -> np.ndarray:
    """M = (1/k) sum (p_i - mean)(p_i - mean)^T over the given points."""
    pts = np.asarray(points, dtype=np.float64)
    centered = pts - pts.mean(axis=0)
    return (centered.T @ centered) / pts.shape[0]


def neighborhood_covariance(cloud: PointCloud, tree: KdTree, i: int, k: int) -> np.ndarray:
    """Covariance over the k nearest neighbors of point i (i included)."""
    if k < 3:
        raise ValueError("k must be >= 3")
    if tree.size < k:
        raise ValueError(f"cloud has {tree.size} valid points, need >= k = {k}")
    neighbors = tree.knn(cloud.points[i], k)
    idx = [j for j, _ in neighbors]
    m = points_covariance(cloud.points[idx])
    if float(np.trace(m)) <= _DEGENERATE_TRACE:
        raise DegenerateNeighborhood(f"neighborhood of point {i} has no spatial extent")
    return m


def local_surface_stats(cloud: PointCloud, tree: KdTree, i: int, k: int) -> LocalSurfaceStats:
    m = neighborhood_covariance(cloud, tree, i, k)
    evals, evecs = np.linalg.eigh(m)
    evals = np.clip(evals, 0.0, None)
    delta = float(evals[0] / evals.sum())
    normal = evecs[:, 0]
    normal = _face_camera(normal, cloud.points[i])
    return LocalSurfaceStats(normal=normal, curvature=delta, k=k)


def _face_camera(normal: np.ndarray, point: np.ndarray) -> np.ndarray:
    """Flip so dot(normal, -point) >= 0, i.e. the normal faces the origin."""
    if float(normal @ point) > 0:
        return -normal
    return normal


def estimate_features(cloud: PointCloud, tree: KdTree, k: int = DEFAULT_K, workers: int = 1) -> PointCloud:
    """Return a copy of the cloud carrying per-point normals and curvatures.

    Degenerate neighborhoods (no spatial extent) do not abort the cloud: the
    point is flagged with delta = 0 and its normal set to the view direction.
    """
    if k < 3:
        raise ValueError("k must be >= 3")
    if tree.size < k:
        raise ValueError(f"cloud has {tree.size} valid points, need >= k = {k}")

    valid_idx = cloud.valid_indices()
    pts = cloud.points[valid_idx]
    _, nbr_idx = tree.knn_batch(pts, k, workers=workers)
    nbr_pts = cloud.points[nbr_idx]  # (n, k, 3)
    means = nbr_pts.mean(axis=1, keepdims=True)
    centered = nbr_pts - means
    cov = np.einsum("nki,nkj->nij", centered, centered) / k

    evals, evecs = np.linalg.eigh(cov)
    evals = np.clip(evals, 0.0, None)
    sums = evals.sum(axis=1)
    degenerate = sums <= _DEGENERATE_TRACE

    deltas = np.zeros(pts.shape[0])
    np.divide(evals[:, 0], sums, out=deltas, where=~degenerate)

    normals = evecs[:, :, 0].copy()
    # view direction for degenerate points: toward the camera origin
    view = -pts
    lens = np.linalg.norm(view, axis=1)
    safe = lens > 1e-12
    view[safe] = view[safe] / lens[safe, None]
    view[~safe] = (0.0, 0.0, -1.0)
    normals[degenerate] = view[degenerate]

    flip = np.einsum("ij,ij->i", normals, pts) > 0
    normals[flip] = -normals[flip]

    full_normals = np.zeros((cloud.size, 3))
    full_curv = np.zeros(cloud.size)
    full_normals[valid_idx] = normals
    full_curv[valid_idx] = deltas
    return PointCloud(
        cloud.points.copy(),
        organization=cloud.organization,
        valid_mask=None if cloud.valid_mask is None else cloud.valid_mask.copy(),
        normals=full_normals,
        curvatures=full_curv,
    )
