"""Synthetic workpiece scans with analytic ground-truth seams.

Scenes are sampled on an orthographic top-down camera grid (one point per
pixel, depth noise along the view ray), so clouds are organized and per-pixel
masks match points exactly. Three workpiece families mirror the physical
benchmark pieces:

* ``butt``: two plates meeting along a straight valley fold (one seam),
* ``tee-rib-array``: a base plate with n upright rib plates whose vertical
  faces are invisible to the top-down camera; each rib carries two chamfer
  strips at its base, so the two chamfer toe lines are the rib's fillet
  seams (2n seams) and no other sampled fold exists,
* ``curved-sinusoid``: a base plate meeting a ramp along a sinusoid arch
  (one curved seam).

World frame: z up, base plate top at z = 0. Camera frame: x right, y down in
the image, z along the view ray; the camera sits ``camera_height_mm`` above
the table looking straight down.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InvalidSpec, IoError, ParseError
from .geometry import CameraIntrinsics, PointCloud, RigidTransform
from .io_formats import MaskImage, SceneBundle

RNG_ALGORITHM = "pcg64"


@dataclass(frozen=True)
class WorkpieceSpec:
    kind: str  # "butt" | "tee-rib-array" | "curved-sinusoid"
    width_mm: float = 160.0
    depth_mm: float = 160.0
    pitch_mm: float = 1.0
    sigma_mm: float = 0.1
    seed: int = 0
    camera_height_mm: float = 400.0
    # butt
    dihedral_deg: float = 110.0
    # tee-rib-array
    rib_count: int = 1
    rib_height_mm: float = 59.0
    rib_thickness_mm: float = 12.0
    chamfer_height_mm: float = 24.0
    chamfer_angle_deg: float = 52.0  # chamfer inclination from horizontal
    rib_length_mm: float = 260.0
    rib_spacing_mm: float = 88.0
    # curved-sinusoid
    amplitude_mm: float = 8.0
    ramp_slope_deg: float = 52.0

    def validate(self) -> None:
        if self.kind not in ("butt", "tee-rib-array", "curved-sinusoid"):
            raise InvalidSpec(f"unknown workpiece kind '{self.kind}'")
        if self.pitch_mm <= 0:
            raise InvalidSpec("sample pitch must be > 0")
        if self.sigma_mm < 0:
            raise InvalidSpec("noise sigma must be >= 0")
        if self.width_mm <= 0 or self.depth_mm <= 0:
            raise InvalidSpec("plate dimensions must be > 0")
        if self.kind == "butt" and not 0 < self.dihedral_deg < 180:
            raise InvalidSpec("butt dihedral must be in (0, 180) degrees")
        if self.kind == "tee-rib-array":
            if self.rib_count < 1:
                raise InvalidSpec("tee-rib-array needs rib_count >= 1")
            if not 0 < self.chamfer_angle_deg < 90:
                raise InvalidSpec("chamfer angle must be in (0, 90) degrees")
            if self.rib_height_mm <= 0 or self.rib_length_mm <= 0:
                raise InvalidSpec("rib dimensions must be > 0")
            if self.rib_thickness_mm <= 0 or self.chamfer_height_mm <= 0:
                raise InvalidSpec("rib thickness and chamfer height must be > 0")
            if self.chamfer_height_mm >= self.rib_height_mm:
                raise InvalidSpec("chamfer must end below the rib top")
            half = self.rib_half_width()
            span = (self.rib_count - 1) * self.rib_spacing_mm + 2 * half
            if span >= self.width_mm:
                raise InvalidSpec("ribs do not fit on the base plate")
            if self.rib_length_mm > self.depth_mm:
                raise InvalidSpec("rib length exceeds the base plate depth")
        if self.kind == "curved-sinusoid":
            if self.amplitude_mm <= 0:
                raise InvalidSpec("sinusoid amplitude must be > 0")
            if not 0 < self.ramp_slope_deg < 90:
                raise InvalidSpec("ramp slope must be in (0, 90) degrees")
        if self.camera_height_mm <= self.max_height() + 1.0:
            raise InvalidSpec("camera height must clear the workpiece")

    def chamfer_run(self) -> float:
        """Horizontal extent of one chamfer strip."""
        return self.chamfer_height_mm / math.tan(math.radians(self.chamfer_angle_deg))

    def rib_half_width(self) -> float:
        """Half the rib footprint: half thickness plus one chamfer run."""
        return self.rib_thickness_mm / 2.0 + self.chamfer_run()

    def max_height(self) -> float:
        if self.kind == "butt":
            tilt = math.radians((180.0 - self.dihedral_deg) / 2.0)
            return (self.width_mm / 2.0) * math.tan(tilt)
        if self.kind == "tee-rib-array":
            return self.rib_height_mm
        return self.depth_mm * math.tan(math.radians(self.ramp_slope_deg))

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_json(cls, doc: dict) -> "WorkpieceSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InvalidSpec(f"unknown spec keys: {sorted(unknown)}")
        if "kind" not in doc:
            raise InvalidSpec("spec is missing 'kind'")
        spec = cls(**doc)
        spec.validate()
        return spec


@dataclass(frozen=True)
class LinearSeamTruth:
    start: np.ndarray  # world frame, mm
    end: np.ndarray

    def distance(self, p: np.ndarray) -> float:
        d = self.end - self.start
        t = float(np.clip((p - self.start) @ d / (d @ d), 0.0, 1.0))
        return float(np.linalg.norm(self.start + t * d - p))

    def sample(self, n: int) -> np.ndarray:
        ts = np.linspace(0.0, 1.0, n)
        return self.start[None, :] + ts[:, None] * (self.end - self.start)[None, :]

    def to_json(self) -> dict:
        return {"type": "linear", "params": {"start": self.start.tolist(), "end": self.end.tolist()}}


@dataclass(frozen=True)
class SinusoidSeamTruth:
    """p(t) = origin + t * x_dir + amplitude * sin(pi * t / span) * y_dir, t in [0, span]."""

    origin: np.ndarray
    x_dir: np.ndarray
    y_dir: np.ndarray
    amplitude: float
    span: float

    def point_at(self, t):
        t = np.asarray(t, dtype=np.float64)
        s = np.sin(np.pi * t / self.span) * self.amplitude
        return (
            self.origin[None, :]
            + np.atleast_1d(t)[:, None] * self.x_dir[None, :]
            + np.atleast_1d(s)[:, None] * self.y_dir[None, :]
        )

    def distance(self, p: np.ndarray) -> float:
        def sq(t: float) -> float:
            return float(np.sum((self.point_at(t)[0] - p) ** 2))

        grid = np.linspace(0.0, self.span, 513)
        vals = np.sum((self.point_at(grid) - p[None, :]) ** 2, axis=1)
        best = int(np.argmin(vals))
        lo = grid[max(0, best - 1)]
        hi = grid[min(len(grid) - 1, best + 1)]
        res = minimize_scalar(sq, bounds=(lo, hi), method="bounded", options={"xatol": 1e-9})
        return math.sqrt(min(float(res.fun), float(vals[best])))

    def sample(self, n: int) -> np.ndarray:
        return self.point_at(np.linspace(0.0, self.span, n))

    def to_json(self) -> dict:
        return {
            "type": "curved",
            "params": {
                "kind": "sinusoid",
                "origin": self.origin.tolist(),
                "x_dir": self.x_dir.tolist(),
                "y_dir": self.y_dir.tolist(),
                "amplitude": self.amplitude,
                "span": self.span,
            },
        }


TruthSeam = LinearSeamTruth | SinusoidSeamTruth


@dataclass
class GroundTruth:
    seams: list[TruthSeam]
    surface_ids: np.ndarray  # (N,) per cloud point, 1-based surface ids
    rng_algorithm: str = RNG_ALGORITHM
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "seams": [s.to_json() for s in self.seams],
            "rng": {"algorithm": self.rng_algorithm, "seed": self.seed},
        }


def point_to_seam_distance(p, truth: GroundTruth) -> float:
    """Minimum distance from p (world frame) to any ground-truth curve."""
    if not truth.seams:
        raise ValueError("ground truth has no seams")
    p = np.asarray(p, dtype=np.float64)
    return min(s.distance(p) for s in truth.seams)


def _height_and_ids(spec: WorkpieceSpec, xs: np.ndarray, ys: np.ndarray):
    """Heightfield z(x, y) and surface id per pixel on the world grid."""
    gx, gy = np.meshgrid(xs, ys)  # (rows, cols)
    if spec.kind == "butt":
        tilt = math.tan(math.radians((180.0 - spec.dihedral_deg) / 2.0))
        z = np.abs(gx) * tilt
        ids = np.where(gx < 0, 1, 2).astype(np.int32)
        seams: list[TruthSeam] = [
            LinearSeamTruth(
                start=np.array([0.0, -spec.depth_mm / 2.0, 0.0]),
                end=np.array([0.0, spec.depth_mm / 2.0, 0.0]),
            )
        ]
        return z, ids, seams

    if spec.kind == "tee-rib-array":
        z = np.zeros_like(gx)
        ids = np.ones_like(gx, dtype=np.int32)
        half_t = spec.rib_thickness_mm / 2.0
        run = spec.chamfer_run()
        half = half_t + run
        slope = math.tan(math.radians(spec.chamfer_angle_deg))
        y0, y1 = -spec.rib_length_mm / 2.0, spec.rib_length_mm / 2.0
        centers = (np.arange(spec.rib_count) - (spec.rib_count - 1) / 2.0) * spec.rib_spacing_mm
        seams = []
        in_len = (gy >= y0) & (gy <= y1)
        for i, cx in enumerate(centers):
            dx = np.abs(gx - cx)
            # chamfer strip rises from the toe line to chamfer_height; the
            # vertical faces above it are invisible to a top-down camera, so
            # the heightfield jumps straight to the rib top face
            on_top = in_len & (dx <= half_t)
            on_chamfer = in_len & (dx > half_t) & (dx < half)
            z = np.where(on_top, spec.rib_height_mm, z)
            z = np.where(on_chamfer, (half - dx) * slope, z)
            on_rib = on_top | on_chamfer
            ids = np.where(on_rib, i + 2, ids)
            for side in (-1.0, 1.0):
                seams.append(
                    LinearSeamTruth(
                        start=np.array([cx + side * half, y0, 0.0]),
                        end=np.array([cx + side * half, y1, 0.0]),
                    )
                )
        return z, ids, seams

    # curved-sinusoid: base plate for y < y_c(x), ramp rising beyond it
    span = spec.width_mm
    x0 = -spec.width_mm / 2.0
    y_c = spec.amplitude_mm * np.sin(np.pi * (gx - x0) / span)
    slope = math.tan(math.radians(spec.ramp_slope_deg))
    above = gy > y_c
    z = np.where(above, (gy - y_c) * slope, 0.0)
    ids = np.where(above, 2, 1).astype(np.int32)
    seams = [
        SinusoidSeamTruth(
            origin=np.array([x0, 0.0, 0.0]),
            x_dir=np.array([1.0, 0.0, 0.0]),
            y_dir=np.array([0.0, 1.0, 0.0]),
            amplitude=spec.amplitude_mm,
            span=span,
        )
    ]
    return z, ids, seams


# fixed, exactly-representable camera mount: the camera hangs off the tool
# rotated a quarter turn about the optical axis
_TOOL_FROM_CAMERA = RigidTransform(
    np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
    np.array([25.0, 40.0, -60.0]),
)


def generate(spec: WorkpieceSpec) -> tuple[SceneBundle, GroundTruth]:
    """Deterministic scene + analytic truth for a workpiece spec."""
    spec.validate()
    cols = int(round(spec.width_mm / spec.pitch_mm))
    rows = int(round(spec.depth_mm / spec.pitch_mm))
    xs = (np.arange(cols) + 0.5) * spec.pitch_mm - spec.width_mm / 2.0
    ys = (np.arange(rows) + 0.5) * spec.pitch_mm - spec.depth_mm / 2.0

    z, ids, seams = _height_and_ids(spec, xs, ys)

    rng = np.random.default_rng(spec.seed)
    if spec.sigma_mm > 0:
        z = z + rng.normal(0.0, spec.sigma_mm, size=z.shape)

    gx, gy = np.meshgrid(xs, ys)
    h = spec.camera_height_mm
    cam_pts = np.column_stack([gx.ravel(), -gy.ravel(), h - z.ravel()])
    cloud = PointCloud(cam_pts, organization=(rows, cols))

    n_surfaces = int(ids.max())
    masks = [MaskImage.from_bool(ids == s) for s in range(1, n_surfaces + 1)]

    # orthographic sampling grid; intrinsics describe the pixel raster for
    # consumers that expect one (the organized path never projects)
    intrinsics = CameraIntrinsics(
        fx=h / spec.pitch_mm, fy=h / spec.pitch_mm,
        cx=(cols - 1) / 2.0, cy=(rows - 1) / 2.0,
        width=cols, height=rows,
    )

    world_from_camera = RigidTransform(
        np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]),
        np.array([0.0, 0.0, h]),
    )
    world_from_tool = world_from_camera.compose(_TOOL_FROM_CAMERA.inverse())

    bundle = SceneBundle(
        cloud=cloud,
        masks=masks,
        intrinsics=intrinsics,
        tool_from_camera=_TOOL_FROM_CAMERA,
        world_from_tool=world_from_tool,
    )
    truth = GroundTruth(seams=seams, surface_ids=ids.ravel().astype(np.int32), seed=spec.seed)
    return bundle, truth


def write_truth(truth: GroundTruth, path) -> None:
    try:
        Path(path).write_text(json.dumps(truth.to_json(), indent=2) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def read_truth(path) -> GroundTruth:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON: {e}") from e
    seams: list[TruthSeam] = []
    for s in doc.get("seams", []):
        params = s.get("params", {})
        if s.get("type") == "linear":
            seams.append(
                LinearSeamTruth(
                    start=np.asarray(params["start"], dtype=np.float64),
                    end=np.asarray(params["end"], dtype=np.float64),
                )
            )
        elif s.get("type") == "curved":
            seams.append(
                SinusoidSeamTruth(
                    origin=np.asarray(params["origin"], dtype=np.float64),
                    x_dir=np.asarray(params["x_dir"], dtype=np.float64),
                    y_dir=np.asarray(params["y_dir"], dtype=np.float64),
                    amplitude=float(params["amplitude"]),
                    span=float(params["span"]),
                )
            )
        else:
            raise ParseError(f"{path}: unknown seam type {s.get('type')}")
    rng = doc.get("rng", {})
    return GroundTruth(
        seams=seams,
        surface_ids=np.zeros(0, dtype=np.int32),
        rng_algorithm=rng.get("algorithm", RNG_ALGORITHM),
        seed=int(rng.get("seed", 0)),
    )


# benchmark fixture suite mirroring the physical test pieces: one straight
# valley, rib arrays with 2 and 10 fillet lines, one curved arch
FIXTURE_SPECS: dict[str, WorkpieceSpec] = {
    "butt": WorkpieceSpec(kind="butt", width_mm=160, depth_mm=160, seed=11),
    "tee1": WorkpieceSpec(
        kind="tee-rib-array", width_mm=220, depth_mm=260, rib_count=1, seed=12
    ),
    "tee5": WorkpieceSpec(
        kind="tee-rib-array", width_mm=500, depth_mm=260, rib_count=5, seed=13
    ),
    "curved": WorkpieceSpec(
        kind="curved-sinusoid", width_mm=120, depth_mm=100, seed=14
    ),
}
