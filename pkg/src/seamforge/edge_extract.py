"""Refine edge candidates into per-seam point sets.

A candidate survives only if its k-NN contains at least ``m_min`` points from
each of two distinct surface segments, i.e. it genuinely sits on the
intersection between two surfaces. Survivors are grouped by their dominant
segment pair and split into connected components by radius linking, so two
seams flanked by the same pair of faces (a rib welded on both sides) come out
as separate seams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import MissingFeatures
from .geometry import PointCloud
from .region_grow import SegmentationResult
from .spatial import KdTree

DEFAULT_REFINE_K = 10
DEFAULT_M_MIN = 3
DEFAULT_MIN_SEAM_POINTS = 10
LINK_R_FACTOR = 2.5


@dataclass
class SeamPointSet:
    indices: np.ndarray  # indices into the working cloud
    segment_pair: tuple[int, int]  # adjacent segment ids, id_a < id_b
    extent_mm: float  # diagonal of the axis-aligned bounding box


def refine_edges(
    seg: SegmentationResult,
    cloud: PointCloud,
    tree: KdTree,
    k: int = DEFAULT_REFINE_K,
    m_min: int = DEFAULT_M_MIN,
    link_r: float = LINK_R_FACTOR * 3.0,
    min_seam_points: int = DEFAULT_MIN_SEAM_POINTS,
    workers: int = 1,
) -> tuple[list[SeamPointSet], dict]:
    """Returns (seams, diagnostics). An empty seam list is a signal, not an error."""
    if not cloud.has_features():
        raise MissingFeatures("edge refinement requires feature-bearing cloud")

    cand = np.flatnonzero(seg.edge_candidates)
    diagnostics: dict = {
        "candidates": int(cand.size),
        "refined": 0,
        "seams": [],
        "dropped_small_components": 0,
    }
    if cand.size == 0:
        return [], diagnostics

    _, nbr_idx = tree.knn_batch(cloud.points[cand], min(k, tree.size), workers=workers)
    nbr_labels = seg.labels[nbr_idx]  # (n_cand, k)

    survivors: list[int] = []
    pair_keys: list[tuple[int, int]] = []
    for row, ci in enumerate(cand):
        lbls = nbr_labels[row]
        lbls = lbls[lbls > 0]
        if lbls.size == 0:
            continue
        ids, counts = np.unique(lbls, return_counts=True)
        strong = ids[counts >= m_min]
        if strong.size < 2:
            continue
        # dominant pair: two largest counts, ties resolved by smaller id
        order = np.lexsort((ids, -counts))
        a, b = int(ids[order[0]]), int(ids[order[1]])
        survivors.append(int(ci))
        pair_keys.append((a, b) if a < b else (b, a))

    diagnostics["refined"] = len(survivors)
    if not survivors:
        return [], diagnostics

    surv = np.asarray(survivors)
    groups: dict[tuple[int, int], list[int]] = {}
    for idx, key in zip(surv, pair_keys):
        groups.setdefault(key, []).append(int(idx))

    seams: list[SeamPointSet] = []
    for key in sorted(groups):
        member_idx = np.asarray(groups[key])
        comp_labels = _link_components(cloud.points[member_idx], link_r)
        for comp in range(comp_labels.max() + 1):
            comp_members = member_idx[comp_labels == comp]
            if comp_members.size < min_seam_points:
                diagnostics["dropped_small_components"] += 1
                continue
            pts = cloud.points[comp_members]
            extent = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
            seams.append(SeamPointSet(indices=comp_members, segment_pair=key, extent_mm=extent))

    # deterministic seam order: by pair then first member index
    seams.sort(key=lambda s: (s.segment_pair, int(s.indices.min())))
    diagnostics["seams"] = [
        {
            "pair": list(s.segment_pair),
            "points": int(s.indices.size),
            "extent_mm": s.extent_mm,
        }
        for s in seams
    ]
    return seams, diagnostics


def _link_components(points: np.ndarray, link_r: float) -> np.ndarray:
    """Connected components of the radius-link graph, labels in first-seen order."""
    n = points.shape[0]
    tree = cKDTree(points)
    pairs = tree.query_pairs(link_r, output_type="ndarray")
    parent = np.arange(n)

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb
    roots = np.array([find(i) for i in range(n)])
    _, labels = np.unique(roots, return_inverse=True)
    seen: dict[int, int] = {}
    for lbl in labels:
        if lbl not in seen:
            seen[lbl] = len(seen)
    remap = np.array([seen[i] for i in range(labels.max() + 1)])
    return remap[labels]
