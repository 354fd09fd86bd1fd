"""Coarse seam localization: turn per-surface masks into a seam ROI and crop.

Adjacent surface masks from a segmenter do not overlap, so each mask is
dilated by a square (Chebyshev) structuring element before pairwise
intersection; the union of the non-empty pairwise intersections is the ROI
band around the candidate seams.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, MissingCorrespondence, TooFewMasks
from .geometry import CameraIntrinsics, PointCloud
from .io_formats import MaskImage

# the ROI band half-width must exceed the feature neighborhood radius
# (~sqrt(k/pi) * voxel) or the flank surfaces inside the band cannot segment
DEFAULT_DILATE_PX = 12


@dataclass
class SeamRoi:
    """Union of pairwise dilated-mask intersections, with pair provenance."""

    roi: MaskImage
    source_pairs: list[tuple[int, int]] = field(default_factory=list)


def dilate_mask(mask: MaskImage, d: int) -> MaskImage:
    """Chebyshev dilation: set pixels within distance d (square side 2d+1)."""
    if d < 0:
        raise ValueError("dilation radius must be >= 0")
    if d == 0:
        return MaskImage(mask.width, mask.height, mask.data.copy())
    grown = ndimage.binary_dilation(
        mask.as_bool(), structure=np.ones((2 * d + 1, 2 * d + 1), dtype=bool)
    )
    return MaskImage.from_bool(grown)


def build_seam_roi(masks: list[MaskImage], d: int = DEFAULT_DILATE_PX) -> SeamRoi:
    """ROI = union over i<j of (dilate(mask_i, d) & dilate(mask_j, d)).

    Pairs whose intersection is empty are excluded from the provenance list.
    """
    if len(masks) < 2:
        raise TooFewMasks(f"seam ROI needs >= 2 masks, got {len(masks)}")
    w, h = masks[0].width, masks[0].height
    for i, m in enumerate(masks):
        if (m.width, m.height) != (w, h):
            raise DimensionMismatch(f"mask {i} is {m.width}x{m.height}, expected {w}x{h}")
    dilated = [dilate_mask(m, d).as_bool() for m in masks]
    union = np.zeros((h, w), dtype=bool)
    pairs = []
    for i in range(len(masks)):
        for j in range(i + 1, len(masks)):
            inter = dilated[i] & dilated[j]
            if inter.any():
                union |= inter
                pairs.append((i, j))
    return SeamRoi(roi=MaskImage.from_bool(union), source_pairs=pairs)


def crop_cloud(
    cloud: PointCloud,
    roi: SeamRoi,
    intrinsics: CameraIntrinsics | None = None,
) -> PointCloud:
    """Keep exactly the points whose pixel lies inside the ROI, order preserved.

    Organized clouds use direct row/col indexing. Unorganized clouds need
    intrinsics for the pinhole projection; points with z <= 0 or projecting
    out of frame are dropped. The result is unorganized.
    """
    occ = roi.roi.as_bool()
    h, w = occ.shape
    if cloud.organization is not None:
        rows, cols = cloud.organization
        if (rows, cols) != (h, w):
            raise DimensionMismatch(
                f"organized cloud {rows}x{cols} does not match ROI {h}x{w}"
            )
        flat = occ.reshape(-1)
        keep = flat & (cloud.valid_mask if cloud.valid_mask is not None else True)
        sel = np.flatnonzero(keep)
    else:
        if intrinsics is None:
            raise MissingCorrespondence(
                "unorganized cloud requires intrinsics to map points to pixels"
            )
        pts = cloud.points
        z = pts[:, 2]
        in_front = z > 0
        u = np.full(pts.shape[0], -1, dtype=np.int64)
        v = np.full(pts.shape[0], -1, dtype=np.int64)
        # nearest-integer rounding with ties toward +inf
        u[in_front] = np.floor(
            intrinsics.fx * pts[in_front, 0] / z[in_front] + intrinsics.cx + 0.5
        ).astype(np.int64)
        v[in_front] = np.floor(
            intrinsics.fy * pts[in_front, 1] / z[in_front] + intrinsics.cy + 0.5
        ).astype(np.int64)
        in_frame = in_front & (u >= 0) & (u < w) & (v >= 0) & (v < h)
        keep = np.zeros(pts.shape[0], dtype=bool)
        keep[in_frame] = occ[v[in_frame], u[in_frame]]
        sel = np.flatnonzero(keep)

    normals = None if cloud.normals is None else cloud.normals[sel]
    curvatures = None if cloud.curvatures is None else cloud.curvatures[sel]
    return PointCloud(cloud.points[sel], normals=normals, curvatures=curvatures)
