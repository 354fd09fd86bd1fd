"""File formats: ASCII PLY clouds, PGM P5 masks, JSON scene manifests and weld paths.

All formats are text/binary-simple on purpose so golden files diff cleanly.
Binary PLY is rejected with a typed error. Cloud organization is carried in a
repo-local PLY comment ``organized <rows> <cols>`` since PLY itself has no
organized-cloud notion.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidTransform,
    IoError,
    ParseError,
    TooFewMasks,
    UnsupportedFormat,
)
from .geometry import CameraIntrinsics, OrientationWPR, PointCloud, RigidTransform
from .path_fit import Waypoint, WeldPath

MASK_THRESHOLD = 128


@dataclass
class MaskImage:
    """Binary occupancy image: 0 = background, 255 = surface."""

    width: int
    height: int
    data: np.ndarray  # (height, width) uint8, values in {0, 255}

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.uint8)
        if arr.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"mask data shape {arr.shape} does not match {self.height}x{self.width}"
            )
        if not np.isin(arr, (0, 255)).all():
            raise ValueError("mask values must be 0 or 255")
        self.data = arr

    @classmethod
    def from_bool(cls, occupancy: np.ndarray) -> "MaskImage":
        occ = np.asarray(occupancy, dtype=bool)
        return cls(occ.shape[1], occ.shape[0], np.where(occ, 255, 0).astype(np.uint8))

    def as_bool(self) -> np.ndarray:
        return self.data == 255

    def count(self) -> int:
        return int((self.data == 255).sum())


@dataclass
class SceneBundle:
    """One capture: cloud + per-surface masks + the two extrinsic transforms."""

    cloud: PointCloud
    masks: list[MaskImage] = field(default_factory=list)
    intrinsics: CameraIntrinsics | None = None
    tool_from_camera: RigidTransform = field(default_factory=RigidTransform.identity)
    world_from_tool: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        if self.masks:
            w, h = self.masks[0].width, self.masks[0].height
            for i, m in enumerate(self.masks):
                if (m.width, m.height) != (w, h):
                    raise DimensionMismatch(
                        f"mask {i} is {m.width}x{m.height}, expected {w}x{h}"
                    )
            if self.cloud.organization is not None:
                rows, cols = self.cloud.organization
                if (rows, cols) != (h, w):
                    raise DimensionMismatch(
                        f"organized cloud {rows}x{cols} does not match mask {h}x{w}"
                    )

    def world_from_camera(self) -> RigidTransform:
        return self.world_from_tool.compose(self.tool_from_camera)


# ---------------------------------------------------------------------------
# PLY


def write_ply(cloud: PointCloud, path) -> None:
    """ASCII PLY with x,y,z (and nx,ny,nz when normals exist), 6 decimals.

    Organized clouds emit the ``organized R C`` comment; masked-out entries are
    written as NaN rows so the grid stays rectangular.
    """
    path = Path(path)
    has_normals = cloud.normals is not None
    lines = ["ply", "format ascii 1.0"]
    if cloud.organization is not None:
        rows, cols = cloud.organization
        lines.append(f"comment organized {rows} {cols}")
    lines.append(f"element vertex {cloud.size}")
    lines += ["property float x", "property float y", "property float z"]
    if has_normals:
        lines += ["property float nx", "property float ny", "property float nz"]
    lines.append("end_header")

    pts = cloud.points
    invalid = None if cloud.valid_mask is None else ~cloud.valid_mask
    for i in range(cloud.size):
        if invalid is not None and invalid[i]:
            row = ["nan", "nan", "nan"]
            if has_normals:
                row += ["nan", "nan", "nan"]
        else:
            row = [f"{v:.6f}" for v in pts[i]]
            if has_normals:
                row += [f"{v:.6f}" for v in cloud.normals[i]]
        lines.append(" ".join(row))
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def read_ply(path) -> PointCloud:
    """Read an ASCII PLY with float vertex properties x, y, z (optional nx, ny, nz)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e

    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(f"{path}: missing 'ply' magic")

    n_vertices = None
    organization = None
    prop_names: list[str] = []
    in_vertex_element = False
    header_end = None
    for idx, raw in enumerate(lines[1:], start=1):
        line = raw.strip()
        if line.startswith("format"):
            parts = line.split()
            if len(parts) < 2 or parts[1] != "ascii":
                raise UnsupportedFormat(f"{path}: only ASCII PLY is supported")
        elif line.startswith("comment"):
            parts = line.split()
            if len(parts) == 4 and parts[1] == "organized":
                try:
                    organization = (int(parts[2]), int(parts[3]))
                except ValueError as e:
                    raise ParseError(f"{path}: bad organized comment: {line}") from e
        elif line.startswith("element"):
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"{path}: bad element line: {line}")
            in_vertex_element = parts[1] == "vertex"
            if in_vertex_element:
                try:
                    n_vertices = int(parts[2])
                except ValueError as e:
                    raise ParseError(f"{path}: bad vertex count: {line}") from e
        elif line.startswith("property"):
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"{path}: bad property line: {line}")
            if in_vertex_element:
                prop_names.append(parts[2])
        elif line == "end_header":
            header_end = idx
            break
        elif line == "":
            continue
        else:
            raise ParseError(f"{path}: unexpected header line: {line}")

    if header_end is None:
        raise ParseError(f"{path}: missing end_header")
    if n_vertices is None:
        raise ParseError(f"{path}: missing 'element vertex'")
    for req in ("x", "y", "z"):
        if req not in prop_names:
            raise ParseError(f"{path}: vertex element lacks property {req}")
    has_normals = all(n in prop_names for n in ("nx", "ny", "nz"))
    col = {name: i for i, name in enumerate(prop_names)}

    body = [ln for ln in lines[header_end + 1 :] if ln.strip()]
    if len(body) < n_vertices:
        raise ParseError(
            f"{path}: expected {n_vertices} vertex rows, found {len(body)}"
        )

    pts = np.empty((n_vertices, 3))
    normals = np.empty((n_vertices, 3)) if has_normals else None
    for i in range(n_vertices):
        parts = body[i].split()
        if len(parts) != len(prop_names):
            raise ParseError(f"{path}: row {i} has {len(parts)} fields, expected {len(prop_names)}")
        try:
            vals = [float(v) for v in parts]
        except ValueError as e:
            raise ParseError(f"{path}: non-numeric value in row {i}") from e
        pts[i] = vals[col["x"]], vals[col["y"]], vals[col["z"]]
        if has_normals:
            normals[i] = vals[col["nx"]], vals[col["ny"]], vals[col["nz"]]

    if organization is not None and organization[0] * organization[1] != n_vertices:
        raise ParseError(
            f"{path}: organized {organization[0]}x{organization[1]} does not cover "
            f"{n_vertices} vertices"
        )
    if normals is not None:
        # 6-decimal storage denormalizes slightly; restore unit length
        lens = np.linalg.norm(normals, axis=1)
        ok = lens > 1e-12
        normals[ok] = normals[ok] / lens[ok, None]
        normals[~ok] = 0.0
    return PointCloud(pts, organization=organization, normals=normals)


# ---------------------------------------------------------------------------
# PGM


def read_mask_pgm(path) -> MaskImage:
    """Read a binary (P5) PGM with maxval 255; values are thresholded at 128."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e

    if raw[:2] == b"P2":
        raise UnsupportedFormat(f"{path}: ASCII PGM (P2) not supported, use P5")
    if raw[:2] != b"P5":
        raise ParseError(f"{path}: not a PGM (missing P5 magic)")

    # header tokens: magic, width, height, maxval; '#' comments allowed
    pos = 2
    tokens: list[bytes] = []
    while len(tokens) < 3 and pos < len(raw):
        c = raw[pos : pos + 1]
        if c == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            pos += 1
        elif c.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(raw) and not raw[pos : pos + 1].isspace():
                pos += 1
            tokens.append(raw[start:pos])
    if len(tokens) < 3:
        raise ParseError(f"{path}: truncated PGM header")
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as e:
        raise ParseError(f"{path}: non-numeric PGM header field") from e
    if width <= 0 or height <= 0:
        raise ParseError(f"{path}: bad PGM dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedFormat(f"{path}: PGM maxval {maxval} not supported (need 255)")
    pos += 1  # single whitespace after maxval
    data = raw[pos : pos + width * height]
    if len(data) < width * height:
        raise ParseError(f"{path}: PGM pixel data truncated")
    pixels = np.frombuffer(data, dtype=np.uint8).reshape(height, width)
    return MaskImage(width, height, np.where(pixels >= MASK_THRESHOLD, 255, 0).astype(np.uint8))


def write_mask_pgm(mask: MaskImage, path) -> None:
    path = Path(path)
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    try:
        path.write_bytes(header + mask.data.tobytes())
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


# ---------------------------------------------------------------------------
# Scene manifest


def _matrix_from_json(value, key: str) -> RigidTransform:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != (4, 4):
        raise ParseError(f"manifest key '{key}' must be a 4x4 row-major matrix")
    try:
        return RigidTransform.from_matrix(arr)
    except InvalidTransform as e:
        raise InvalidTransform(f"manifest key '{key}': {e}") from e


def read_scene(manifest_path) -> SceneBundle:
    """Load a scene manifest plus the files it names (paths relative to it)."""
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text())
    except OSError as e:
        raise IoError(f"cannot read {manifest_path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"{manifest_path}: invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ParseError(f"{manifest_path}: manifest must be a JSON object")
    for req in ("cloud", "tool_from_camera", "world_from_tool"):
        if req not in doc:
            raise ParseError(f"{manifest_path}: missing required key '{req}'")

    base = manifest_path.parent
    cloud = read_ply(base / doc["cloud"])
    masks = [read_mask_pgm(base / m) for m in doc.get("masks", [])]

    intrinsics = None
    if doc.get("intrinsics") is not None:
        idoc = doc["intrinsics"]
        try:
            intrinsics = CameraIntrinsics(
                fx=float(idoc["fx"]),
                fy=float(idoc["fy"]),
                cx=float(idoc["cx"]),
                cy=float(idoc["cy"]),
                width=int(idoc["width"]),
                height=int(idoc["height"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"{manifest_path}: bad intrinsics: {e}") from e

    return SceneBundle(
        cloud=cloud,
        masks=masks,
        intrinsics=intrinsics,
        tool_from_camera=_matrix_from_json(doc["tool_from_camera"], "tool_from_camera"),
        world_from_tool=_matrix_from_json(doc["world_from_tool"], "world_from_tool"),
    )


def write_scene(bundle: SceneBundle, out_dir) -> Path:
    """Write cloud + masks + manifest into out_dir; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_ply(bundle.cloud, out_dir / "cloud.ply")
    mask_names = []
    for i, mask in enumerate(bundle.masks):
        name = f"surface_{i}.pgm"
        write_mask_pgm(mask, out_dir / name)
        mask_names.append(name)
    doc: dict = {"cloud": "cloud.ply", "masks": mask_names}
    if bundle.intrinsics is not None:
        ic = bundle.intrinsics
        doc["intrinsics"] = {
            "fx": ic.fx, "fy": ic.fy, "cx": ic.cx, "cy": ic.cy,
            "width": ic.width, "height": ic.height,
        }
    doc["tool_from_camera"] = bundle.tool_from_camera.matrix().tolist()
    doc["world_from_tool"] = bundle.world_from_tool.matrix().tolist()
    manifest = out_dir / "scene.json"
    try:
        manifest.write_text(json.dumps(doc, indent=2) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {manifest}: {e}") from e
    return manifest


# ---------------------------------------------------------------------------
# Weld path JSON


def write_weld_path(seams: list[WeldPath], path) -> None:
    """JSON weld-path document; key order fixed for golden-file diffs."""
    doc = {
        "seams": [
            {
                "type": s.kind,
                "residual_mm": float(s.residual_mm),
                "waypoints": [
                    {
                        "x": float(wp.position[0]),
                        "y": float(wp.position[1]),
                        "z": float(wp.position[2]),
                        "w": float(wp.orientation.w),
                        "p": float(wp.orientation.p),
                        "r": float(wp.orientation.r),
                    }
                    for wp in s.waypoints
                ],
            }
            for s in seams
        ]
    }
    try:
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def read_weld_path(path) -> list[WeldPath]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(doc, dict) or "seams" not in doc:
        raise ParseError(f"{path}: missing 'seams'")
    seams = []
    for s in doc["seams"]:
        if s.get("type") not in ("linear", "curved"):
            raise ParseError(f"{path}: seam type must be 'linear' or 'curved'")
        waypoints = [
            Waypoint(
                position=np.array([wp["x"], wp["y"], wp["z"]], dtype=np.float64),
                orientation=OrientationWPR(wp["w"], wp["p"], wp["r"]),
            )
            for wp in s.get("waypoints", [])
        ]
        seams.append(WeldPath(kind=s["type"], residual_mm=float(s["residual_mm"]), waypoints=waypoints))
    return seams
