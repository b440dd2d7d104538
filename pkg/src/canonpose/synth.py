"""Synthetic pose generation and brute-force self-checks.

Poses are fixed-topology skeletons grown edge by edge from a rest template:
bone lengths are jittered within +-10%, bone directions are perturbed by a
bounded random rotation, the whole body gets a random yaw, and the root is
placed uniformly inside a camera-space box. Anatomical plausibility is loose
on purpose; the consumers test geometry, not biomechanics.

Randomness is counter-based: every pose is drawn from its own Philox stream
keyed by (seed, stream offset + pose index), so generation order, batching,
and thread count cannot change the output.

The oracles (`consistency_oracle`, `many_to_one_demo`) exercise the public
camera/canonical operations against each other; the only math re-derived
from first principles is the projection inside the residual check, which is
intentionally independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import (
    EPS_DEPTH,
    CameraIntrinsics,
    Frame,
    Pose3D,
    batch_project,
    batch_screen_normalize,
)
from .canonical import (
    batch_canonicalize_2d,
    batch_canonicalize_3d,
    batch_project_centered,
    residual_offset,
)
from .skeleton import H36M17, Skeleton

# Streams with the same seed never overlap: each pose index selects a
# disjoint Philox key, and callers can offset indices to carve out
# independent namespaces (the lifting study separates train/test this way).
STREAM_SPAN = 1 << 48


def pose_rng(seed: int, index: int) -> np.random.Generator:
    """The dedicated random stream for one (seed, index) pair."""
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True, eq=False)
class Box3:
    """Axis-aligned box in camera space, meters."""

    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        low = np.array(self.low, dtype=np.float64).reshape(3)
        high = np.array(self.high, dtype=np.float64).reshape(3)
        if not (np.isfinite(low).all() and np.isfinite(high).all()):
            raise ValueError("box bounds must be finite")
        if (low > high).any():
            raise ValueError(f"box low {low.tolist()} exceeds high {high.tolist()}")
        low.setflags(write=False)
        high.setflags(write=False)
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return ((pts >= self.low) & (pts <= self.high)).all(axis=-1)

    def to_dict(self) -> dict:
        return {"low": self.low.tolist(), "high": self.high.tolist()}


DEFAULT_ROOT_REGION = Box3((-0.5, -0.5, 3.0), (0.5, 0.5, 5.0))
# Roots closer than this to the camera make limbs liable to cross the camera
# plane; generation refuses such regions outright.
MIN_ROOT_DEPTH = 0.5


@dataclass(frozen=True, eq=False)
class SynthConfig:
    """Generator configuration.

    ``intrinsics_pool`` is carried for harnesses that sweep cameras; the
    generator itself is camera-free (it produces 3D poses).
    """

    seed: int
    n_poses: int
    limb_scale: float = 1.0
    root_region: Box3 = DEFAULT_ROOT_REGION
    intrinsics_pool: tuple[CameraIntrinsics, ...] = ()

    def __post_init__(self):
        seed = int(self.seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        object.__setattr__(self, "seed", seed)
        object.__setattr__(self, "n_poses", int(self.n_poses))
        if self.n_poses < 1:
            raise ValueError(f"n_poses must be >= 1, got {self.n_poses}")
        object.__setattr__(self, "limb_scale", float(self.limb_scale))
        if not (np.isfinite(self.limb_scale) and self.limb_scale > 0):
            raise ValueError(f"limb_scale must be positive, got {self.limb_scale!r}")
        if self.root_region.low[2] <= MIN_ROOT_DEPTH:
            raise ValueError(
                f"root_region must lie entirely at Z > {MIN_ROOT_DEPTH} m, "
                f"got low Z = {self.root_region.low[2]}"
            )
        object.__setattr__(self, "intrinsics_pool", tuple(self.intrinsics_pool))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_poses": self.n_poses,
            "limb_scale": self.limb_scale,
            "root_region": self.root_region.to_dict(),
        }


# Rest template for the default skeleton: per-edge unit direction (camera
# frame: x right, y down, z forward; the subject faces the camera) and bone
# length in meters.
_H36M17_TEMPLATE = {
    (0, 1): ((-1.0, 0.1, 0.0), 0.13),
    (1, 2): ((0.0, 1.0, 0.0), 0.45),
    (2, 3): ((0.0, 1.0, 0.1), 0.45),
    (0, 4): ((1.0, 0.1, 0.0), 0.13),
    (4, 5): ((0.0, 1.0, 0.0), 0.45),
    (5, 6): ((0.0, 1.0, 0.1), 0.45),
    (0, 7): ((0.0, -1.0, 0.0), 0.24),
    (7, 8): ((0.0, -1.0, 0.05), 0.25),
    (8, 9): ((0.0, -1.0, 0.0), 0.12),
    (9, 10): ((0.0, -1.0, 0.1), 0.12),
    (8, 11): ((1.0, -0.05, 0.0), 0.16),
    (11, 12): ((1.0, 0.2, 0.1), 0.28),
    (12, 13): ((1.0, 0.3, 0.0), 0.25),
    (8, 14): ((-1.0, -0.05, 0.0), 0.16),
    (14, 15): ((-1.0, 0.2, 0.1), 0.28),
    (15, 16): ((-1.0, 0.3, 0.0), 0.25),
}

# Bone directions are perturbed by a rotation of at most this angle (radians).
MAX_BONE_SWING = 0.5
BONE_LENGTH_JITTER = 0.1
# Whole-body orientation: uniform yaw about the vertical, plus a lean of up
# to this angle about a uniformly random horizontal axis. People bend and
# lean; they rarely hang upside down.
MAX_BODY_TILT = 0.7


def _rest_template(skeleton: Skeleton) -> tuple[np.ndarray, np.ndarray]:
    """Unit rest directions (E, 3) and lengths (E,) per topological edge."""
    edges = skeleton.topological_edges
    directions = np.zeros((len(edges), 3))
    lengths = np.zeros(len(edges))
    for i, edge in enumerate(edges):
        if skeleton.name == H36M17.name and edge in _H36M17_TEMPLATE:
            direction, length = _H36M17_TEMPLATE[edge]
        else:
            # Unknown skeletons get a deterministic spread of directions (a
            # golden-angle spiral over the sphere) and a uniform bone length.
            golden = np.pi * (3.0 - np.sqrt(5.0))
            z = 1.0 - 2.0 * (i + 0.5) / max(len(edges), 1)
            r = np.sqrt(max(1.0 - z * z, 0.0))
            direction, length = (r * np.cos(golden * i), r * np.sin(golden * i), z), 0.3
        vec = np.asarray(direction, dtype=np.float64)
        directions[i] = vec / np.linalg.norm(vec)
        lengths[i] = length
    return directions, lengths


def _rotate_about_axes(vectors: np.ndarray, axes: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Rotate (..., 3) vectors by per-row angles about per-row unit axes."""
    cos = np.cos(angles)[..., None]
    sin = np.sin(angles)[..., None]
    dot = np.sum(axes * vectors, axis=-1, keepdims=True)
    return vectors * cos + np.cross(axes, vectors) * sin + axes * dot * (1.0 - cos)


def generate_pose_array(config: SynthConfig, skeleton: Skeleton, stream: int = 0) -> np.ndarray:
    """Generate (n_poses, J, 3) camera-frame joints.

    ``stream`` offsets the per-pose Philox indices by stream * STREAM_SPAN,
    giving independent draws for the same seed (train vs test sets).
    """
    edges = skeleton.topological_edges
    rest_dirs, rest_lens = _rest_template(skeleton)
    n, e = config.n_poses, len(edges)

    roots = np.empty((n, 3))
    yaws = np.empty(n)
    lean_azimuths = np.empty(n)
    lean_angles = np.empty(n)
    jitters = np.empty((n, e))
    axes = np.empty((n, e, 3))
    angles = np.empty((n, e))
    base = stream * STREAM_SPAN
    low, span = config.root_region.low, config.root_region.high - config.root_region.low
    for i in range(n):
        rng = pose_rng(config.seed, base + i)
        roots[i] = low + rng.uniform(size=3) * span
        yaws[i] = rng.uniform(0.0, 2.0 * np.pi)
        lean_azimuths[i] = rng.uniform(0.0, 2.0 * np.pi)
        lean_angles[i] = rng.uniform(0.0, MAX_BODY_TILT)
        jitters[i] = rng.uniform(-BONE_LENGTH_JITTER, BONE_LENGTH_JITTER, size=e)
        axes[i] = rng.standard_normal(size=(e, 3))
        angles[i] = rng.uniform(0.0, MAX_BONE_SWING, size=e)

    norms = np.linalg.norm(axes, axis=-1, keepdims=True)
    axes = np.where(norms > 1e-12, axes / np.where(norms > 0, norms, 1.0), [0.0, 0.0, 1.0])

    lengths = rest_lens * config.limb_scale * (1.0 + jitters)
    directions = _rotate_about_axes(np.broadcast_to(rest_dirs, (n, e, 3)), axes, angles)
    bones = lengths[..., None] * directions

    # Whole-body orientation: yaw about the vertical, then lean about a
    # random horizontal axis (y is down in the camera frame).
    cos_y, sin_y = np.cos(yaws), np.sin(yaws)
    yawed = np.empty_like(bones)
    yawed[..., 0] = cos_y[:, None] * bones[..., 0] + sin_y[:, None] * bones[..., 2]
    yawed[..., 1] = bones[..., 1]
    yawed[..., 2] = -sin_y[:, None] * bones[..., 0] + cos_y[:, None] * bones[..., 2]

    lean_axes = np.stack(
        [np.cos(lean_azimuths), np.zeros(n), np.sin(lean_azimuths)], axis=-1
    )
    leaned = _rotate_about_axes(yawed, lean_axes[:, None, :], lean_angles[:, None])

    joints = np.zeros((n, skeleton.n_joints, 3))
    joints[:, skeleton.root_index] = roots
    for i, (parent, child) in enumerate(edges):
        joints[:, child] = joints[:, parent] + leaned[:, i]
    return joints


def generate_poses(config: SynthConfig, skeleton: Skeleton) -> list[Pose3D]:
    """Generate camera-frame poses; identical output for identical configs."""
    return [Pose3D(j, Frame.CAMERA) for j in generate_pose_array(config, skeleton)]


def random_intrinsics(rng: np.random.Generator) -> CameraIntrinsics:
    """One plausible pinhole camera drawn from ``rng`` (for harness sweeps)."""
    width = float(rng.integers(640, 1921))
    height = float(rng.integers(480, 1201))
    return CameraIntrinsics(
        fx=width * rng.uniform(0.8, 1.6),
        fy=width * rng.uniform(0.8, 1.6),
        cx=width * rng.uniform(0.4, 0.6),
        cy=height * rng.uniform(0.4, 0.6),
        width=width,
        height=height,
    )


# ---------------------------------------------------------------------------
# Oracles.
# ---------------------------------------------------------------------------

CONSISTENCY_THRESHOLD = 1e-9


@dataclass(frozen=True, eq=False)
class ConsistencyReport:
    """Per-pose discrepancy between the 3D and 2D canonicalization paths."""

    per_pose_max: np.ndarray
    failed_indices: tuple[int, ...]
    threshold: float = CONSISTENCY_THRESHOLD

    @property
    def n_poses(self) -> int:
        return self.per_pose_max.shape[0] + len(self.failed_indices)

    @property
    def max_discrepancy(self) -> float:
        return float(self.per_pose_max.max()) if self.per_pose_max.size else 0.0

    @property
    def mean_discrepancy(self) -> float:
        return float(self.per_pose_max.mean()) if self.per_pose_max.size else 0.0

    @property
    def n_flagged(self) -> int:
        return int((self.per_pose_max > self.threshold).sum())

    @property
    def passed(self) -> bool:
        return not self.failed_indices and self.n_flagged == 0

    def to_dict(self) -> dict:
        return {
            "n_poses": self.n_poses,
            "threshold": self.threshold,
            "max_discrepancy_px": self.max_discrepancy,
            "mean_discrepancy_px": self.mean_discrepancy,
            "n_flagged": self.n_flagged,
            "failed_pose_indices": list(self.failed_indices),
            "passed": self.passed,
        }


def consistency_oracle(
    poses,
    intrinsics: CameraIntrinsics,
    skeleton: Skeleton | None = None,
    intrinsics_2d_path: CameraIntrinsics | None = None,
) -> ConsistencyReport:
    """Compare canonical 2D poses built through the 3D and the 2D paths.

    For each pose the 3D path (canonicalize the 3D pose, project centered)
    and the 2D path (project, canonicalize the pixels) should agree to within
    floating-point noise; the report records each pose's worst coordinate
    discrepancy in pixels. Poses that cannot be canonicalized at all are
    listed in ``failed_indices`` rather than raised.

    ``intrinsics_2d_path`` substitutes a different camera into the 2D path;
    feeding deliberately wrong intrinsics is the negative control that shows
    the oracle actually measures something.
    """
    if isinstance(poses, np.ndarray):
        points = np.asarray(poses, dtype=np.float64)
    else:
        poses = list(poses)
        if not poses:
            return ConsistencyReport(np.zeros(0), ())
        points = np.stack([pose.joints for pose in poses])
    root = (skeleton or H36M17).root_index if skeleton or points.shape[1] == H36M17.n_joints else 0
    k2 = intrinsics_2d_path if intrinsics_2d_path is not None else intrinsics

    def both_paths(pts: np.ndarray) -> np.ndarray:
        canon3, _, _ = batch_canonicalize_3d(pts, root)
        via_3d = batch_project_centered(canon3, intrinsics)
        observed = batch_project(pts, intrinsics)
        via_2d, _, _ = batch_canonicalize_2d(observed, k2, root)
        return np.abs(via_3d - via_2d).max(axis=(1, 2))

    try:
        return ConsistencyReport(both_paths(points), ())
    except ValueError:
        per_pose, failed = [], []
        for index in range(points.shape[0]):
            try:
                per_pose.append(float(both_paths(points[index : index + 1])[0]))
            except ValueError:
                failed.append(index)
        return ConsistencyReport(np.asarray(per_pose), tuple(failed))


@dataclass(frozen=True, eq=False)
class ManyToOneReport:
    """How much the same pose's 2D input varies with its placement.

    Dispersions are the largest coordinate spread (max minus min across
    placements) of the screen-normalized 2D poses; the canonical root figure
    is the largest absolute canonical root coordinate, which centering pins
    to exactly zero.
    """

    n_positions: int
    conventional_dispersion: float
    canonical_dispersion: float
    conventional_root_dispersion: float
    canonical_root_max_abs: float
    residual_max_error: float

    def to_dict(self) -> dict:
        return {
            "n_positions": self.n_positions,
            "conventional_dispersion": self.conventional_dispersion,
            "canonical_dispersion": self.canonical_dispersion,
            "conventional_root_dispersion": self.conventional_root_dispersion,
            "canonical_root_max_abs": self.canonical_root_max_abs,
            "residual_max_error_px": self.residual_max_error,
        }


def many_to_one_demo(
    base_pose_root_relative, positions, intrinsics: CameraIntrinsics, skeleton: Skeleton | None = None
) -> ManyToOneReport:
    """Place one root-relative pose at several roots and compare 2D inputs.

    Conventional screen-normalized 2D poses drift with the placement (the
    many-to-one problem); canonical ones keep their root pinned at (0, 0).
    Also verifies, joint by joint and from first principles, that moving the
    pose off-axis shifts its projection by exactly ``residual_offset``
    evaluated at each joint's depth.
    """
    base = base_pose_root_relative.joints if isinstance(base_pose_root_relative, Pose3D) else base_pose_root_relative
    base = np.asarray(base, dtype=np.float64)
    root = (skeleton or H36M17).root_index if skeleton or base.shape[0] == H36M17.n_joints else 0
    if np.abs(base[root]).max() > 1e-12:
        raise ValueError("base pose must be root-relative (root at the origin)")
    offsets = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if (offsets[:, 2] <= EPS_DEPTH).any():
        raise ValueError("all positions must have Z > EPS_DEPTH")

    placed = base[None] + offsets[:, None, :]
    conventional = batch_screen_normalize(batch_project(placed, intrinsics), intrinsics)
    canon3, _, _ = batch_canonicalize_3d(placed, root)
    canonical = batch_screen_normalize(batch_project_centered(canon3, intrinsics), intrinsics)

    def spread(arr: np.ndarray) -> float:
        return float((arr.max(axis=0) - arr.min(axis=0)).max()) if arr.shape[0] > 1 else 0.0

    # Residual check, projection written out from first principles on purpose
    # (an independent recomputation, not a call into the camera module).
    max_error = 0.0
    for offset in offsets:
        on_axis = base + np.array([0.0, 0.0, offset[2]])
        moved = base + offset
        for j in range(base.shape[0]):
            z = moved[j, 2]
            proj_moved = np.array(
                [intrinsics.fx * moved[j, 0] / z + intrinsics.cx, intrinsics.fy * moved[j, 1] / z + intrinsics.cy]
            )
            proj_axis = np.array(
                [intrinsics.fx * on_axis[j, 0] / z + intrinsics.cx, intrinsics.fy * on_axis[j, 1] / z + intrinsics.cy]
            )
            predicted = residual_offset((offset[0], offset[1], z), intrinsics)
            max_error = max(max_error, float(np.abs(proj_moved - proj_axis - predicted).max()))

    return ManyToOneReport(
        n_positions=offsets.shape[0],
        conventional_dispersion=spread(conventional.reshape(offsets.shape[0], -1)),
        canonical_dispersion=spread(canonical.reshape(offsets.shape[0], -1)),
        conventional_root_dispersion=spread(conventional[:, root]),
        canonical_root_max_abs=float(np.abs(canonical[:, root]).max()),
        residual_max_error=max_error,
    )
