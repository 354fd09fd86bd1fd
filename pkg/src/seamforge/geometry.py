"""Core geometric types: rigid transforms, torch orientations, point clouds.

Conventions used everywhere in this package:

* lengths are millimeters,
* the torch orientation (w, p, r) is fixed-axis X/Y/Z (roll-pitch-yaw) in
  degrees, i.e. R = Rz(r) @ Ry(p) @ Rx(w), the teach-pendant convention of
  common industrial controllers,
* organized clouds store a validity mask; NaN rows are accepted on ingest
  and converted to masked-out entries.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCloud, GimbalLockWarning, InvalidTransform

ROTATION_TOL = 1e-9


def _as_point(p) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    return arr


def is_rotation(m: np.ndarray, tol: float = ROTATION_TOL) -> bool:
    """True if m is orthonormal with det +1 within tol per entry."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        return False
    if not np.all(np.isfinite(m)):
        return False
    if not np.allclose(m.T @ m, np.eye(3), atol=tol, rtol=0.0):
        return False
    return abs(float(np.linalg.det(m)) - 1.0) <= tol


def orthonormalize(m: np.ndarray) -> np.ndarray:
    """Project a near-rotation onto the closest proper rotation (SVD polar)."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=np.float64))
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid motion: p -> rotation @ p + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        tr = _as_point(self.translation)
        if not is_rotation(rot):
            raise InvalidTransform("rotation is not orthonormal with det +1 within 1e-9")
        if not np.all(np.isfinite(tr)):
            raise InvalidTransform("translation must be finite")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m, *, tol: float = ROTATION_TOL) -> "RigidTransform":
        """Build from a 4x4 homogeneous matrix.

        Rotations off by more than ``tol`` but within 1e-6 are snapped to the
        nearest proper rotation; worse than 1e-6 raises InvalidTransform.
        """
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (4, 4):
            raise InvalidTransform(f"expected 4x4 matrix, got {m.shape}")
        if not np.allclose(m[3], [0.0, 0.0, 0.0, 1.0], atol=1e-9):
            raise InvalidTransform("last row must be [0, 0, 0, 1]")
        rot = m[:3, :3]
        if not is_rotation(rot, tol=tol):
            if not is_rotation(rot, tol=1e-6):
                raise InvalidTransform("rotation block non-orthonormal beyond 1e-6")
            rot = orthonormalize(rot)
        return cls(rot, m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points) -> np.ndarray:
        """Apply to one (3,) point or a batch (N, 3)."""
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            return self.rotation @ pts + self.translation
        return pts @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: (self.compose(other)).apply(p) == self.apply(other.apply(p))."""
        rot = self.rotation @ other.rotation
        if not is_rotation(rot):
            rot = orthonormalize(rot)
        return RigidTransform(rot, self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))


def apply_transform(t: RigidTransform, p) -> np.ndarray:
    return t.apply(p)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    return a.compose(b)


def invert(t: RigidTransform) -> RigidTransform:
    return t.inverse()


def _canonical_deg(a: float) -> float:
    """Map an angle in degrees to (-180, 180]."""
    a = a % 360.0
    if a > 180.0:
        a -= 360.0
    return a


@dataclass(frozen=True)
class OrientationWPR:
    """Fixed-axis X/Y/Z rotation angles in degrees, each in (-180, 180]."""

    w: float
    p: float
    r: float

    def __post_init__(self):
        for name in ("w", "p", "r"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, _canonical_deg(v))


def wpr_to_rotation(wpr: OrientationWPR) -> np.ndarray:
    """Rotation matrix R = Rz(r) @ Ry(p) @ Rx(w), angles in degrees."""
    w, p, r = np.radians([wpr.w, wpr.p, wpr.r])
    cw, sw = math.cos(w), math.sin(w)
    cp, sp = math.cos(p), math.sin(p)
    cr, sr = math.cos(r), math.sin(r)
    rx = np.array([[1, 0, 0], [0, cw, -sw], [0, sw, cw]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cr, -sr, 0], [sr, cr, 0], [0, 0, 1]])
    return rz @ ry @ rx


def rotation_to_wpr(rotation: np.ndarray) -> OrientationWPR:
    """Decompose an orthonormal matrix into fixed-axis X/Y/Z angles.

    At gimbal lock (|cos p| < 1e-9) emits GimbalLockWarning and returns the
    canonical decomposition with r := 0.
    """
    m = np.asarray(rotation, dtype=np.float64)
    if not is_rotation(m, tol=1e-6):
        raise InvalidTransform("input is not orthonormal within 1e-6")
    sp = -m[2, 0]
    sp = min(1.0, max(-1.0, float(sp)))
    p = math.asin(sp)
    if abs(math.cos(p)) < 1e-9:
        warnings.warn(
            "rotation at gimbal lock (|p| = 90 deg); returning decomposition with r = 0",
            GimbalLockWarning,
            stacklevel=2,
        )
        if sp > 0:  # p = +90: w - r recoverable, fix r = 0
            w = math.atan2(m[0, 1], m[0, 2])
        else:  # p = -90: w + r recoverable, fix r = 0
            w = math.atan2(-m[0, 1], -m[0, 2])
        return OrientationWPR(math.degrees(w), math.degrees(p), 0.0)
    w = math.atan2(m[2, 1], m[2, 2])
    r = math.atan2(m[1, 0], m[0, 0])
    return OrientationWPR(math.degrees(w), math.degrees(p), math.degrees(r))


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics: u = fx*x/z + cx, v = fy*y/z + cy."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass
class PointCloud:
    """A set of 3D points with optional pixel organization and per-point features.

    ``points`` is (N, 3) float64. When ``organization`` = (rows, cols) is set,
    N == rows*cols and ``valid_mask`` marks the real measurements; invalid
    entries hold zeros. Normals, when present, are unit length per valid point.
    """

    points: np.ndarray
    organization: tuple[int, int] | None = None
    valid_mask: np.ndarray | None = None
    normals: np.ndarray | None = None
    curvatures: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must be (N, 3), got {pts.shape}")
        n = pts.shape[0]

        if self.valid_mask is None:
            mask = np.isfinite(pts).all(axis=1)
        else:
            mask = np.asarray(self.valid_mask, dtype=bool)
            if mask.shape != (n,):
                raise ValueError("valid_mask length must match point count")
            mask = mask & np.isfinite(pts).all(axis=1)

        if not mask.all():
            # NaN/inf accepted on ingest, stored as masked-out zeros
            pts = pts.copy()
            pts[~mask] = 0.0

        if self.organization is not None:
            rows, cols = self.organization
            if rows * cols != n:
                raise ValueError(
                    f"organization {rows}x{cols} does not cover {n} points"
                )
            self.organization = (int(rows), int(cols))
            self.valid_mask = mask
        else:
            if not mask.all():
                pts = pts[mask]
                n = pts.shape[0]
            self.valid_mask = None

        self.points = pts

        if self.normals is not None:
            nm = np.asarray(self.normals, dtype=np.float64)
            if nm.shape != (n, 3):
                raise ValueError("normals length must match point count")
            lens = np.linalg.norm(nm, axis=1)
            check = lens if self.valid_mask is None else lens[self.valid_mask]
            if check.size and not np.allclose(check, 1.0, atol=1e-6):
                raise ValueError("normals must be unit length within 1e-6")
            self.normals = nm
        if self.curvatures is not None:
            cv = np.asarray(self.curvatures, dtype=np.float64)
            if cv.shape != (n,):
                raise ValueError("curvatures length must match point count")
            self.curvatures = cv

    @property
    def size(self) -> int:
        """Total stored entries (including masked-out ones when organized)."""
        return self.points.shape[0]

    @property
    def n_valid(self) -> int:
        if self.valid_mask is None:
            return self.size
        return int(self.valid_mask.sum())

    def valid_points(self) -> np.ndarray:
        if self.valid_mask is None:
            return self.points
        return self.points[self.valid_mask]

    def valid_indices(self) -> np.ndarray:
        if self.valid_mask is None:
            return np.arange(self.size)
        return np.flatnonzero(self.valid_mask)

    def has_features(self) -> bool:
        return self.normals is not None and self.curvatures is not None

    def transformed(self, t: RigidTransform) -> "PointCloud":
        pts = t.apply(self.points)
        if self.valid_mask is not None:
            pts[~self.valid_mask] = 0.0
        normals = None if self.normals is None else self.normals @ t.rotation.T
        return PointCloud(
            pts,
            organization=self.organization,
            valid_mask=None if self.valid_mask is None else self.valid_mask.copy(),
            normals=normals,
            curvatures=None if self.curvatures is None else self.curvatures.copy(),
        )

    def require_nonempty(self) -> None:
        if self.n_valid == 0:
            raise EmptyCloud("point cloud has no valid points")
