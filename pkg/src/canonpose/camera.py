"""Pinhole camera model and tagged pose containers.

Coordinate conventions
----------------------
3D frames (``Pose3D.frame``):

* ``global``: world coordinates, meters.
* ``camera``: x right, y down, z along the optical axis, meters.
* ``canonical-camera``: camera frame rotated so the subject's root joint lies
  on the optical axis.

2D spaces (``Pose2D.space``):

* ``image``: pixels, origin at the top-left corner, u right, v down.
* ``normalized-plane``: ((u - cx) / fx, (v - cy) / fy), i.e. coordinates on
  the plane at depth 1.
* ``screen-normalized``: ((2u - W) / W, (2v - H) / W); both axes are divided
  by the width, so x spans [-1, 1] and the aspect ratio is preserved.

Projection follows the standard pinhole model

    u = fx * X / Z + cx,    v = fy * Y / Z + cy

and rejects joints with Z <= EPS_DEPTH rather than dividing by a vanishing
depth. All arithmetic is 64-bit; every tolerance in this package assumes it.
Frame and space tags are checked at every operation boundary because silent
mixups between the four 2D/3D spaces are the dominant bug class in this
domain.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .errors import BehindCameraError, FrameMismatchError, ParseError, SchemaError

# Joints with Z at or below this depth (meters) are rejected by projection.
EPS_DEPTH = 1e-6
# Tolerance for orthogonality / unit-determinant checks on rotation matrices.
EPS_ROTATION = 1e-9


class Frame(str, enum.Enum):
    """Coordinate frame of a 3D pose."""

    GLOBAL = "global"
    CAMERA = "camera"
    CANONICAL_CAMERA = "canonical-camera"


class Space(str, enum.Enum):
    """Coordinate space of a 2D pose."""

    IMAGE = "image"
    NORMALIZED_PLANE = "normalized-plane"
    SCREEN_NORMALIZED = "screen-normalized"


def _as_readonly_array(values, last_dim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != last_dim or arr.shape[0] < 1:
        raise ValueError(f"{name} must have shape (J, {last_dim}), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


def _require_frame(pose: "Pose3D", frame: Frame, op: str) -> None:
    if pose.frame is not frame:
        raise FrameMismatchError(
            f"{op} expects a pose in the '{frame.value}' frame, got '{pose.frame.value}'"
        )


def _require_space(pose: "Pose2D", space: Space, op: str) -> None:
    if pose.space is not space:
        raise FrameMismatchError(
            f"{op} expects a pose in the '{space.value}' space, got '{pose.space.value}'"
        )


def _check_rotation_matrix(matrix: np.ndarray, name: str) -> None:
    gram_error = np.abs(matrix.T @ matrix - np.eye(3)).max()
    if gram_error > EPS_ROTATION:
        raise ValueError(f"{name} is not orthogonal (max |R^T R - I| = {gram_error:.3e})")
    det = np.linalg.det(matrix)
    if abs(det - 1.0) > EPS_ROTATION:
        raise ValueError(f"{name} is not a proper rotation (det = {det!r})")


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics plus image size, all in pixels.

    The principal point must lie strictly inside the image and both focal
    lengths must be positive.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: float
    height: float

    def __post_init__(self):
        for field in ("fx", "fy", "cx", "cy", "width", "height"):
            value = float(getattr(self, field))
            if not np.isfinite(value):
                raise ValueError(f"intrinsics field {field} is not finite")
            object.__setattr__(self, field, value)
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if not (0 < self.cx < self.width):
            raise ValueError(f"cx={self.cx} must lie strictly inside (0, {self.width})")
        if not (0 < self.cy < self.height):
            raise ValueError(f"cy={self.cy} must lie strictly inside (0, {self.height})")

    @property
    def matrix(self) -> np.ndarray:
        """The 3x3 intrinsic matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }


@dataclass(frozen=True, eq=False)
class CameraExtrinsics:
    """World-to-camera rigid transform: P_camera = R @ P_world + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=np.float64)
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {rot.shape}")
        if not np.isfinite(rot).all():
            raise ValueError("rotation contains non-finite values")
        _check_rotation_matrix(rot, "extrinsic rotation")
        trans = np.array(self.translation, dtype=np.float64).reshape(-1)
        if trans.shape != (3,) or not np.isfinite(trans).all():
            raise ValueError("translation must be a finite 3-vector")
        rot.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)


@dataclass(frozen=True, eq=False)
class Pose3D:
    """A (J, 3) joint array in meters, tagged with its coordinate frame."""

    joints: np.ndarray
    frame: Frame

    def __post_init__(self):
        object.__setattr__(self, "joints", _as_readonly_array(self.joints, 3, "joints"))
        object.__setattr__(self, "frame", Frame(self.frame))

    @property
    def n_joints(self) -> int:
        return self.joints.shape[0]


@dataclass(frozen=True, eq=False)
class Pose2D:
    """A (J, 2) joint array, tagged with its 2D coordinate space."""

    joints: np.ndarray
    space: Space

    def __post_init__(self):
        object.__setattr__(self, "joints", _as_readonly_array(self.joints, 2, "joints"))
        object.__setattr__(self, "space", Space(self.space))

    @property
    def n_joints(self) -> int:
        return self.joints.shape[0]


# ---------------------------------------------------------------------------
# Batch kernels. These operate on bare arrays with any number of leading axes
# and do all the real work; the tagged single-pose operations below wrap them,
# so both paths share one set of numerics.
# ---------------------------------------------------------------------------


def batch_world_to_camera(points: np.ndarray, rotation: np.ndarray, translation: np.ndarray) -> np.ndarray:
    """Apply P_camera = R @ P_world + t over a (..., 3) array."""
    pts = np.asarray(points, dtype=np.float64)
    return pts @ np.asarray(rotation, dtype=np.float64).T + np.asarray(translation, dtype=np.float64)


def _check_depths(z: np.ndarray, what: str) -> None:
    bad = z <= EPS_DEPTH
    if bad.any():
        flat = np.unique(np.nonzero(bad)[0])
        raise BehindCameraError(
            f"{int(bad.sum())} {what} at or behind the camera plane (Z <= {EPS_DEPTH})",
            indices=flat,
        )


def batch_project(points: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Pinhole projection of a (..., 3) array to (..., 2) pixel coordinates.

    Raises BehindCameraError when any Z <= EPS_DEPTH; the error indexes the
    leading axis of ``points``.
    """
    pts = np.asarray(points, dtype=np.float64)
    z = pts[..., 2]
    _check_depths(z, "point(s)")
    out = np.empty(pts.shape[:-1] + (2,), dtype=np.float64)
    out[..., 0] = intrinsics.fx * pts[..., 0] / z + intrinsics.cx
    out[..., 1] = intrinsics.fy * pts[..., 1] / z + intrinsics.cy
    return out


def batch_to_normalized_plane(pixels: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Map (..., 2) pixel coordinates onto the depth-1 plane via K^-1."""
    pix = np.asarray(pixels, dtype=np.float64)
    out = np.empty_like(pix)
    out[..., 0] = (pix[..., 0] - intrinsics.cx) / intrinsics.fx
    out[..., 1] = (pix[..., 1] - intrinsics.cy) / intrinsics.fy
    return out


def batch_screen_normalize(pixels: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Map (..., 2) pixel coordinates to screen-normalized coordinates."""
    pix = np.asarray(pixels, dtype=np.float64)
    out = np.empty_like(pix)
    out[..., 0] = (2.0 * pix[..., 0] - intrinsics.width) / intrinsics.width
    out[..., 1] = (2.0 * pix[..., 1] - intrinsics.height) / intrinsics.width
    return out


# ---------------------------------------------------------------------------
# Tagged single-pose operations.
# ---------------------------------------------------------------------------


def world_to_camera(pose: Pose3D, extrinsics: CameraExtrinsics) -> Pose3D:
    """Transform a global-frame pose into the camera frame.

    Args:
        pose: pose in the global frame.
        extrinsics: world-to-camera rotation and translation.

    Returns:
        The same joints expressed in the camera frame.
    """
    _require_frame(pose, Frame.GLOBAL, "world_to_camera")
    joints = batch_world_to_camera(pose.joints, extrinsics.rotation, extrinsics.translation)
    return Pose3D(joints, Frame.CAMERA)


def project(pose: Pose3D, intrinsics: CameraIntrinsics) -> Pose2D:
    """Project a camera-frame pose onto the image plane.

    Args:
        pose: pose in the camera frame with all joints at Z > EPS_DEPTH.
        intrinsics: pinhole parameters.

    Returns:
        Pixel coordinates in image space.
    """
    _require_frame(pose, Frame.CAMERA, "project")
    return Pose2D(batch_project(pose.joints, intrinsics), Space.IMAGE)


def to_normalized_plane(pose: Pose2D, intrinsics: CameraIntrinsics) -> Pose2D:
    """Strip the intrinsics from an image-space pose.

    The result lives on the plane at depth 1: reprojecting with the same K
    (x * fx + cx, y * fy + cy) recovers the input.
    """
    _require_space(pose, Space.IMAGE, "to_normalized_plane")
    return Pose2D(batch_to_normalized_plane(pose.joints, intrinsics), Space.NORMALIZED_PLANE)


def screen_normalize(pose: Pose2D, intrinsics: CameraIntrinsics) -> Pose2D:
    """Rescale an image-space pose so x spans [-1, 1] with aspect preserved."""
    _require_space(pose, Space.IMAGE, "screen_normalize")
    return Pose2D(batch_screen_normalize(pose.joints, intrinsics), Space.SCREEN_NORMALIZED)


def load_camera_json(path) -> tuple[CameraIntrinsics, CameraExtrinsics | None]:
    """Read a camera description file.

    The file is a single JSON object with numeric keys ``fx, fy, cx, cy,
    width, height`` and optional ``R`` (9 numbers, row-major) and ``t``
    (3 numbers). Missing extrinsics mean poses are already camera-frame.

    Returns:
        (intrinsics, extrinsics or None).
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid camera JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: camera file must hold a JSON object")
    required = ("fx", "fy", "cx", "cy", "width", "height")
    missing = [key for key in required if key not in obj]
    if missing:
        raise SchemaError(f"{path}: camera file missing keys {missing}")
    try:
        intrinsics = CameraIntrinsics(*(float(obj[key]) for key in required))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: invalid intrinsics: {exc}") from exc
    extrinsics = None
    if "R" in obj or "t" in obj:
        rot = obj.get("R", (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0))
        trans = obj.get("t", (0.0, 0.0, 0.0))
        try:
            rot = np.asarray(rot, dtype=np.float64).reshape(3, 3)
            extrinsics = CameraExtrinsics(rot, trans)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: invalid extrinsics: {exc}") from exc
    return intrinsics, extrinsics
