"""Region-growing segmentation: grow smooth segments from low-curvature seeds.

Growth repeats until no eligible point remains: a new segment is seeded at
the unclaimed point of globally smallest curvature (ties by index), then
BFS-grows through k-NN neighborhoods. A neighbor whose normal deviates from
the current seed's normal by more than the angle threshold is flagged as an
edge candidate but stays claimable: if a later frontier (typically the
surface the point actually belongs to) admits it, the label wins and the
flag clears. Points rejected by every frontier that saw them end up as the
edge candidates, which keeps candidate strips symmetric about the fold
instead of depending on which surface grew first. A neighbor that joins a
segment becomes a seed itself when its curvature is below the seed
threshold. Segments below the minimum size are dissolved to unassigned and
retired. Angles use |dot| so normal sign flips across folds do not matter.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingFeatures
from .geometry import PointCloud
from .spatial import KdTree


@dataclass(frozen=True)
class GrowthParams:
    theta1_deg: float = 20.0  # normal-angle bound for joining a segment
    c2: float = 0.01  # curvature bound for seed promotion
    k_grow: int = 10
    min_segment_size: int = 50

    def __post_init__(self):
        if not 0 < self.theta1_deg < 90:
            raise ValueError("theta1_deg must be in (0, 90)")
        if not 0 <= self.c2 <= 1 / 3:
            raise ValueError("c2 must be in [0, 1/3]")
        if self.k_grow < 3:
            raise ValueError("k_grow must be >= 3")
        if self.min_segment_size < 1:
            raise ValueError("min_segment_size must be >= 1")


@dataclass(frozen=True)
class SegmentInfo:
    segment_id: int
    point_count: int
    mean_normal: np.ndarray


@dataclass
class SegmentationResult:
    """Per-point labels (0 = unassigned), edge-candidate flags, segment stats."""

    labels: np.ndarray  # (N,) int32
    edge_candidates: np.ndarray  # (N,) bool
    segments: list[SegmentInfo] = field(default_factory=list)

    def n_segments(self) -> int:
        return len(self.segments)


def segment(cloud: PointCloud, tree: KdTree, params: GrowthParams, workers: int = 1) -> SegmentationResult:
    if not cloud.has_features():
        raise MissingFeatures("region growing requires normals and curvatures")
    cloud.require_nonempty()

    valid_idx = cloud.valid_indices()
    n_valid = valid_idx.shape[0]
    k = min(params.k_grow, n_valid)
    _, nbr_orig = tree.knn_batch(cloud.points[valid_idx], k, workers=workers)

    # work in valid-subset positions; scatter back to cloud indices at the end
    pos_of = np.full(cloud.size, -1, dtype=np.int64)
    pos_of[valid_idx] = np.arange(n_valid)
    nbrs = pos_of[nbr_orig]  # (n_valid, k), all >= 0 since tree holds valid points

    normals = cloud.normals[valid_idx]
    curved = cloud.curvatures[valid_idx]
    cos_theta1 = float(np.cos(np.radians(params.theta1_deg)))

    labels = np.zeros(n_valid, dtype=np.int32)
    edge_flag = np.zeros(n_valid, dtype=bool)
    retired = np.zeros(n_valid, dtype=bool)  # dissolved-segment members

    # stable sort = ties broken by ascending index, so seeding is deterministic
    order = np.argsort(curved, kind="stable")
    cursor = 0
    next_id = 1
    segments: list[SegmentInfo] = []

    while True:
        while cursor < n_valid and (
            labels[order[cursor]] != 0 or edge_flag[order[cursor]] or retired[order[cursor]]
        ):
            cursor += 1
        if cursor == n_valid:
            break
        root = int(order[cursor])
        sid = next_id
        next_id += 1
        labels[root] = sid
        members = [root]
        queue = deque([root])
        while queue:
            s = queue.popleft()
            row = nbrs[s]
            fresh = row[(labels[row] == 0) & ~retired[row]]
            if fresh.size == 0:
                continue
            joins = np.abs(normals[fresh] @ normals[s]) >= cos_theta1
            edge_flag[fresh[~joins]] = True
            joined = fresh[joins]
            if joined.size == 0:
                continue
            labels[joined] = sid
            edge_flag[joined] = False  # label wins over an earlier rejection
            members.extend(int(j) for j in joined)
            queue.extend(int(j) for j in joined[curved[joined] < params.c2])
        if len(members) < params.min_segment_size:
            arr = np.asarray(members)
            labels[arr] = 0  # dissolved to unassigned, never reconsidered
            retired[arr] = True
        else:
            mean_n = normals[np.asarray(members)].mean(axis=0)
            norm = np.linalg.norm(mean_n)
            mean_n = mean_n / norm if norm > 1e-12 else normals[root].copy()
            segments.append(SegmentInfo(sid, len(members), mean_n))

    # renumber surviving segments densely (1..m) in discovery order
    remap = np.zeros(next_id, dtype=np.int32)
    renumbered: list[SegmentInfo] = []
    for new_id, info in enumerate(segments, start=1):
        remap[info.segment_id] = new_id
        renumbered.append(SegmentInfo(new_id, info.point_count, info.mean_normal))
    labels = remap[labels]

    full_labels = np.zeros(cloud.size, dtype=np.int32)
    full_edges = np.zeros(cloud.size, dtype=bool)
    full_labels[valid_idx] = labels
    full_edges[valid_idx] = edge_flag
    return SegmentationResult(labels=full_labels, edge_candidates=full_edges, segments=renumbered)
