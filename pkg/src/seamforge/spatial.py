"""KD-tree range and nearest-neighbor search over the valid points of a cloud.

Backed by scipy's compiled kd-tree; this wrapper owns the contract the rest of
the pipeline relies on: masked-out organized points are excluded at build
time, results are reported as original cloud indices, and all searches are
deterministic with ties broken by ascending index (exactly what a brute-force
scan sorted by ``(distance, index)`` returns).
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyCloud
from .geometry import PointCloud

LEAF_SIZE = 16


class KdTree:
    """Immutable spatial index; safe for concurrent queries after build."""

    def __init__(self, cloud: PointCloud):
        pts = cloud.valid_points()
        if pts.shape[0] == 0:
            raise EmptyCloud("cannot build a KD-tree over an empty cloud")
        if not np.all(np.isfinite(pts)):
            raise ValueError("cloud contains non-finite coordinates")
        self._points = np.ascontiguousarray(pts)
        self._index_map = cloud.valid_indices()
        self._tree = cKDTree(self._points, leafsize=LEAF_SIZE, balanced_tree=True)

    @property
    def size(self) -> int:
        return self._points.shape[0]

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def index_map(self) -> np.ndarray:
        """Maps tree positions to original cloud indices."""
        return self._index_map

    def knn(self, query, k: int) -> list[tuple[int, float]]:
        """The min(k, size) nearest points, sorted by (distance, index).

        Exact tie handling: all points at the cut-off distance are gathered
        with a radius query and the first k survive after the (distance,
        index) sort, so duplicated coordinates resolve the same way a
        brute-force scan does.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        q = np.asarray(query, dtype=np.float64)
        k_eff = min(k, self.size)
        dists, pos = self._tree.query(q, k=k_eff)
        dists = np.atleast_1d(dists)
        pos = np.atleast_1d(pos)
        d_max = float(dists[-1])
        cand = self._tree.query_ball_point(q, d_max + 1e-12)
        if len(cand) > len(pos):
            pos = np.asarray(cand, dtype=np.intp)
            dists = np.linalg.norm(self._points[pos] - q, axis=1)
        order = np.lexsort((self._index_map[pos], dists))[:k_eff]
        return [(int(self._index_map[pos[i]]), float(dists[i])) for i in order]

    def radius_search(self, query, radius: float) -> list[tuple[int, float]]:
        """All points with distance <= radius, sorted by (distance, index)."""
        if radius <= 0:
            raise ValueError("radius must be > 0")
        q = np.asarray(query, dtype=np.float64)
        pos = np.asarray(self._tree.query_ball_point(q, radius), dtype=np.intp)
        if pos.size == 0:
            return []
        dists = np.linalg.norm(self._points[pos] - q, axis=1)
        keep = dists <= radius
        pos, dists = pos[keep], dists[keep]
        order = np.lexsort((self._index_map[pos], dists))
        return [(int(self._index_map[pos[i]]), float(dists[i])) for i in order]

    # Batch paths used by the feature and growth stages. Results are original
    # cloud indices; each row is sorted by distance (scipy's order), which is
    # deterministic for a fixed input.

    def knn_batch(self, queries: np.ndarray, k: int, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """(distances, indices), each (Q, min(k, size))."""
        k_eff = min(k, self.size)
        dists, pos = self._tree.query(np.asarray(queries, dtype=np.float64), k=k_eff, workers=workers)
        if k_eff == 1:
            dists = dists[:, None]
            pos = pos[:, None]
        return dists, self._index_map[pos]

    def radius_batch(self, queries: np.ndarray, radius: float, workers: int = 1) -> list[np.ndarray]:
        """Per-query arrays of original indices within radius (unsorted)."""
        hits = self._tree.query_ball_point(
            np.asarray(queries, dtype=np.float64), radius, workers=workers
        )
        return [self._index_map[np.asarray(h, dtype=np.intp)] for h in hits]


def build(cloud: PointCloud) -> KdTree:
    return KdTree(cloud)


def knn(tree: KdTree, query, k: int) -> list[tuple[int, float]]:
    return tree.knn(query, k)


def radius_search(tree: KdTree, query, radius: float) -> list[tuple[int, float]]:
    return tree.radius_search(query, radius)
