"""Welding path generation from refined seam point sets.

Each seam is fit in three steps: total-least-squares plane, projection into a
plane-aligned frame (z constant), then an in-plane line or low-degree
polynomial over the principal axis. Waypoints are sampled uniformly in arc
length; the torch approach axis is the negated bisector of the two flanking
surface normals, re-orthogonalized against the local tangent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateGeometry, FitRejected
from .geometry import (
    OrientationWPR,
    PointCloud,
    RigidTransform,
    rotation_to_wpr,
    wpr_to_rotation,
)
from .spatial import KdTree

DEFAULT_LINE_TOL = 0.5  # mm RMS, accept a linear model
DEFAULT_CURVE_TOL = 0.8  # mm RMS, accept a polynomial model
DEFAULT_STEP_MM = 2.0
_ARC_SAMPLES = 4096


@dataclass(frozen=True)
class Waypoint:
    position: np.ndarray  # (3,) mm
    orientation: OrientationWPR


@dataclass
class WeldPath:
    kind: str  # "linear" | "curved"
    residual_mm: float
    waypoints: list[Waypoint] = field(default_factory=list)
    segment_pair: tuple[int, int] | None = None


@dataclass
class FittedSeam:
    kind: str  # "linear" | "curved"
    plane: tuple[float, float, float, float]  # (A, B, C, D), unit normal
    frame: RigidTransform  # camera -> plane coordinates (plane maps to z = 0)
    residual_mm: float
    # linear model: y ~ 0 along the in-plane x axis; curved: y = poly(x)
    coeffs: np.ndarray | None  # ascending polynomial coefficients (curved)
    line_point: np.ndarray | None  # (2,) in-plane anchor (linear)
    line_dir: np.ndarray | None  # (2,) unit direction (linear)
    x_range: tuple[float, float]  # abscissa span of the seam points
    endpoints: tuple[np.ndarray, np.ndarray]  # 3D camera-frame start/end


def fit_plane(points: np.ndarray) -> tuple[float, float, float, float]:
    """Total-least-squares plane (A,B,C,D), A^2+B^2+C^2 = 1, through the barycenter.

    Sign convention: C >= 0, ties broken by B >= 0 then A >= 0. Collinear input
    (no unique plane direction) raises DegenerateGeometry.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[0] < 3:
        raise DegenerateGeometry("plane fit needs >= 3 points")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered
    evals, evecs = np.linalg.eigh(cov)
    scale = max(float(evals[2]), 1.0)
    if float(evals[1]) <= 1e-12 * scale:
        raise DegenerateGeometry("points are collinear; plane is not unique")
    normal = evecs[:, 0]
    a, b, c = (float(v) for v in normal)
    tol = 1e-12
    flip = c < -tol or (abs(c) <= tol and (b < -tol or (abs(b) <= tol and a < 0)))
    if flip:
        a, b, c = -a, -b, -c
    d = -(a * centroid[0] + b * centroid[1] + c * centroid[2])
    return a, b, c, d


def to_plane_frame(
    points: np.ndarray, plane: tuple[float, float, float, float]
) -> tuple[np.ndarray, RigidTransform]:
    """Project points onto the plane and build the plane-aligned frame.

    The frame maps camera coordinates to plane coordinates whose z-axis is the
    plane normal and whose x-axis is the direction of largest in-plane
    variance; projected points map to z = 0 exactly. Returns the projected
    points' (x, y) and the frame.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = np.asarray(plane[:3], dtype=np.float64)
    d = float(plane[3])
    dist = pts @ n + d
    proj = pts - dist[:, None] * n

    centered = proj - proj.mean(axis=0)
    cov = centered.T @ centered
    evals, evecs = np.linalg.eigh(cov)
    x_axis = evecs[:, 2]
    x_axis = x_axis - (x_axis @ n) * n
    norm = np.linalg.norm(x_axis)
    if norm < 1e-12:
        # projected points have no in-plane spread; any in-plane axis works
        x_axis = np.array([1.0, 0.0, 0.0]) - n[0] * n
        x_axis = x_axis / np.linalg.norm(x_axis)
    else:
        x_axis = x_axis / norm
    # deterministic sign: the largest-magnitude component is positive
    idx = int(np.argmax(np.abs(x_axis)))
    if x_axis[idx] < 0:
        x_axis = -x_axis
    y_axis = np.cross(n, x_axis)

    rot = np.vstack([x_axis, y_axis, n])
    origin = proj.mean(axis=0)
    frame = RigidTransform(rot, -(rot @ origin))
    local = frame.apply(proj)
    return local[:, :2], frame


@dataclass
class InPlaneFit:
    kind: str
    residual_mm: float
    coeffs: np.ndarray | None
    line_point: np.ndarray | None
    line_dir: np.ndarray | None


def fit_inplane(
    points2d: np.ndarray,
    line_tol: float = DEFAULT_LINE_TOL,
    curve_tol: float = DEFAULT_CURVE_TOL,
) -> InPlaneFit:
    """Fit a TLS line; fall back to polynomial y(x) of degree 2 then 3.

    The lowest-degree model whose RMS residual meets its tolerance wins; if
    degree 3 still exceeds curve_tol the fit is rejected.
    """
    pts = np.asarray(points2d, dtype=np.float64)
    if pts.shape[0] < 2:
        raise DegenerateGeometry("in-plane fit needs >= 2 points")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered
    evals, evecs = np.linalg.eigh(cov)
    direction = evecs[:, 1]
    idx = int(np.argmax(np.abs(direction)))
    if direction[idx] < 0:
        direction = -direction
    perp = centered @ np.array([-direction[1], direction[0]])
    rms_line = float(np.sqrt(np.mean(perp**2)))
    if rms_line <= line_tol:
        return InPlaneFit("linear", rms_line, None, centroid, direction)

    if pts.shape[0] < 5:
        raise FitRejected(
            f"line RMS {rms_line:.3f} mm exceeds {line_tol} mm and too few points for a curve"
        )
    x, y = pts[:, 0], pts[:, 1]
    for degree in (2, 3):
        coeffs = np.polynomial.polynomial.polyfit(x, y, degree)
        resid = y - np.polynomial.polynomial.polyval(x, coeffs)
        rms = float(np.sqrt(np.mean(resid**2)))
        if rms <= curve_tol:
            return InPlaneFit("curved", rms, coeffs, None, None)
    raise FitRejected(
        f"no polynomial model up to degree 3 meets the {curve_tol} mm tolerance"
    )


def fit_seam(
    points3d: np.ndarray,
    line_tol: float = DEFAULT_LINE_TOL,
    curve_tol: float = DEFAULT_CURVE_TOL,
) -> FittedSeam:
    """Plane fit, plane-frame projection, and in-plane model for one seam."""
    plane = fit_plane(points3d)
    pts2d, frame = to_plane_frame(points3d, plane)
    fit = fit_inplane(pts2d, line_tol=line_tol, curve_tol=curve_tol)

    inv = frame.inverse()
    if fit.kind == "linear":
        t = (pts2d - fit.line_point) @ fit.line_dir
        t0, t1 = float(t.min()), float(t.max())
        p0 = fit.line_point + t0 * fit.line_dir
        p1 = fit.line_point + t1 * fit.line_dir
        endpoints = (
            inv.apply(np.array([p0[0], p0[1], 0.0])),
            inv.apply(np.array([p1[0], p1[1], 0.0])),
        )
        x_range = (t0, t1)
    else:
        x0, x1 = float(pts2d[:, 0].min()), float(pts2d[:, 0].max())
        y0 = float(np.polynomial.polynomial.polyval(x0, fit.coeffs))
        y1 = float(np.polynomial.polynomial.polyval(x1, fit.coeffs))
        endpoints = (
            inv.apply(np.array([x0, y0, 0.0])),
            inv.apply(np.array([x1, y1, 0.0])),
        )
        x_range = (x0, x1)

    seam = FittedSeam(
        kind=fit.kind,
        plane=plane,
        frame=frame,
        residual_mm=fit.residual_mm,
        coeffs=fit.coeffs,
        line_point=fit.line_point,
        line_dir=fit.line_dir,
        x_range=x_range,
        endpoints=endpoints,
    )
    _check_fit_envelope(seam, points3d)
    return seam


def _check_fit_envelope(seam: FittedSeam, points3d: np.ndarray) -> None:
    """Every seam point must lie within max(5*residual, 2 mm) of the fitted curve."""
    bound = max(5.0 * seam.residual_mm, 2.0)
    samples, _ = sample_waypoint_positions(seam, step=max(bound / 4.0, 0.25))
    d, _ = cKDTree(samples).query(points3d, k=1)
    if float(np.max(d)) > bound:
        raise FitRejected(
            f"seam point deviates {float(np.max(d)):.3f} mm from the fitted curve "
            f"(allowed {bound:.3f} mm)"
        )


def sample_waypoint_positions(seam: FittedSeam, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Camera-frame positions and unit tangents along the seam, endpoints included.

    Spacing is uniform in arc length, approximately ``step``; a seam shorter
    than the step yields exactly its two endpoints.
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    inv = seam.frame.inverse()
    lo, hi = seam.x_range
    if seam.kind == "linear":
        length = hi - lo
        n_seg = max(1, round(length / step))
        ts = np.linspace(lo, hi, n_seg + 1)
        pts2d = seam.line_point[None, :] + ts[:, None] * seam.line_dir[None, :]
        tangents2d = np.tile(seam.line_dir, (ts.size, 1))
    else:
        xs_dense = np.linspace(lo, hi, _ARC_SAMPLES)
        ys_dense = np.polynomial.polynomial.polyval(xs_dense, seam.coeffs)
        seg = np.sqrt(np.diff(xs_dense) ** 2 + np.diff(ys_dense) ** 2)
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        length = float(arc[-1])
        n_seg = max(1, round(length / step))
        targets = np.linspace(0.0, length, n_seg + 1)
        xs = np.interp(targets, arc, xs_dense)
        ys = np.polynomial.polynomial.polyval(xs, seam.coeffs)
        pts2d = np.column_stack([xs, ys])
        deriv = np.polynomial.polynomial.polyval(
            xs, np.polynomial.polynomial.polyder(seam.coeffs)
        )
        tangents2d = np.column_stack([np.ones_like(xs), deriv])
        tangents2d /= np.linalg.norm(tangents2d, axis=1)[:, None]

    pts3d = inv.apply(np.column_stack([pts2d, np.zeros(pts2d.shape[0])]))
    tan3d = np.column_stack([tangents2d, np.zeros(pts2d.shape[0])]) @ seam.frame.rotation
    tan3d /= np.linalg.norm(tan3d, axis=1)[:, None]
    return pts3d, tan3d


def compute_torch_pose(tangent: np.ndarray, n1: np.ndarray, n2: np.ndarray) -> OrientationWPR:
    """Torch orientation at a waypoint from the two flanking surface normals.

    Approach axis a = -normalize(n1 + n2) re-orthogonalized against the seam
    tangent t; the torch frame is {t, a x t, a} with x along the seam.
    """
    t = np.asarray(tangent, dtype=np.float64)
    t = t / np.linalg.norm(t)
    bisector = np.asarray(n1, dtype=np.float64) + np.asarray(n2, dtype=np.float64)
    norm = np.linalg.norm(bisector)
    if norm < 1e-9:
        raise DegenerateGeometry("flanking normals are opposed; torch pose undefined")
    a = -bisector / norm
    a = a - (a @ t) * t
    norm = np.linalg.norm(a)
    if norm < 1e-9:
        raise DegenerateGeometry("approach axis parallel to the seam tangent")
    a = a / norm
    rot = np.column_stack([t, np.cross(a, t), a])
    return rotation_to_wpr(rot)


def seam_to_path(
    seam_indices: np.ndarray,
    cloud: PointCloud,
    tree: KdTree,
    labels: np.ndarray,
    segment_pair: tuple[int, int],
    segment_mean_normals: dict[int, np.ndarray],
    step: float = DEFAULT_STEP_MM,
    line_tol: float = DEFAULT_LINE_TOL,
    curve_tol: float = DEFAULT_CURVE_TOL,
    pose_radius: float | None = None,
) -> WeldPath:
    """Fit one seam and emit its camera-frame path with per-waypoint poses.

    Flanking normals are averaged over each adjacent segment's points near the
    waypoint; when none are in range the segment's mean normal is used.
    """
    seam = fit_seam(cloud.points[seam_indices], line_tol=line_tol, curve_tol=curve_tol)
    positions, tangents = sample_waypoint_positions(seam, step)
    if pose_radius is None:
        pose_radius = max(6.0, 3.0 * step)

    id_a, id_b = segment_pair
    near = tree.radius_batch(positions, pose_radius)
    waypoints = []
    for pos, tan, idx in zip(positions, tangents, near):
        n1 = _local_mean_normal(cloud, labels, idx, id_a, segment_mean_normals)
        n2 = _local_mean_normal(cloud, labels, idx, id_b, segment_mean_normals)
        waypoints.append(Waypoint(position=pos, orientation=compute_torch_pose(tan, n1, n2)))
    return WeldPath(
        kind=seam.kind,
        residual_mm=seam.residual_mm,
        waypoints=waypoints,
        segment_pair=segment_pair,
    )


def _local_mean_normal(
    cloud: PointCloud,
    labels: np.ndarray,
    neighbor_idx: np.ndarray,
    segment_id: int,
    fallback: dict[int, np.ndarray],
) -> np.ndarray:
    members = neighbor_idx[labels[neighbor_idx] == segment_id]
    if members.size == 0:
        return fallback[segment_id]
    n = cloud.normals[members].mean(axis=0)
    norm = np.linalg.norm(n)
    return n / norm if norm > 1e-12 else fallback[segment_id]


def to_world(
    path: WeldPath, tool_from_camera: RigidTransform, world_from_tool: RigidTransform
) -> WeldPath:
    """Transform a camera-frame path into the world frame (positions and poses)."""
    t = world_from_tool.compose(tool_from_camera)
    waypoints = []
    for wp in path.waypoints:
        rot = t.rotation @ wpr_to_rotation(wp.orientation)
        waypoints.append(
            Waypoint(position=t.apply(wp.position), orientation=rotation_to_wpr(rot))
        )
    return WeldPath(
        kind=path.kind,
        residual_mm=path.residual_mm,
        waypoints=waypoints,
        segment_pair=path.segment_pair,
    )
