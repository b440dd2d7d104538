"""Distribution diagnostics over pose datasets.

Three views of where the data lives: pelvis positions (camera-frame x-y and
image plane), body orientation directions, and pooled joint scatter. Each is
summarized with per-axis bounds, mean, and fixed 64-bin histograms so runs
are reproducible and diffable; rendering is out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics, Frame, Space
from .jsonfmt import format_float
from .skeleton import Skeleton

HIST_BINS = 64
# Cross products below this norm give no usable orientation direction.
EPS_ORIENTATION = 1e-12


@dataclass(frozen=True, eq=False)
class AxisHistogram:
    """Counts over HIST_BINS uniform bins spanning one axis."""

    edges: np.ndarray
    counts: np.ndarray

    def to_dict(self) -> dict:
        return {"edges": self.edges.tolist(), "counts": [int(c) for c in self.counts]}


@dataclass(frozen=True, eq=False)
class DistributionSummary:
    """Samples plus their per-axis bounds, mean, and histograms.

    ``n_degenerate`` counts inputs that produced no sample (currently only
    near-zero cross products in the orientation statistic).
    """

    samples: np.ndarray
    bounds: np.ndarray | None
    mean: np.ndarray | None
    histograms: tuple[AxisHistogram, ...]
    n_degenerate: int = 0

    @classmethod
    def from_samples(cls, samples, n_degenerate: int = 0) -> "DistributionSummary":
        arr = np.asarray(samples, dtype=np.float64)
        if arr.ndim != 2:
            arr = arr.reshape(0, 2) if arr.size == 0 else np.atleast_2d(arr)
        if arr.shape[0] == 0:
            return cls(arr, None, None, (), n_degenerate)
        bounds = np.stack([arr.min(axis=0), arr.max(axis=0)], axis=1)
        mean = arr.mean(axis=0)
        histograms = []
        for axis in range(arr.shape[1]):
            lo, hi = bounds[axis]
            if lo == hi:
                # All samples identical on this axis; give the bin range a
                # nonzero width so every sample still lands in a bin.
                lo, hi = lo - 0.5, hi + 0.5
            edges = np.linspace(lo, hi, HIST_BINS + 1)
            counts, _ = np.histogram(arr[:, axis], bins=edges)
            histograms.append(AxisHistogram(edges, counts))
        return cls(arr, bounds, mean, tuple(histograms), n_degenerate)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    def to_dict(self, include_samples: bool = False) -> dict:
        out: dict = {"count": self.n_samples, "degenerate_count": self.n_degenerate}
        if self.bounds is not None:
            out["bounds"] = self.bounds.tolist()
            out["mean"] = self.mean.tolist()
            out["histograms"] = [h.to_dict() for h in self.histograms]
        if include_samples:
            out["samples"] = self.samples.tolist()
        return out


def write_samples_csv(summary: DistributionSummary, path) -> None:
    """Dump raw samples as CSV with an x,y[,z] header (17-digit floats)."""
    width = summary.samples.shape[1] if summary.samples.size else 2
    header = ",".join("xyz"[:width])
    lines = [header]
    for row in summary.samples:
        lines.append(",".join(format_float(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def pelvis_position_distribution(
    sequences, intrinsics: CameraIntrinsics | None = None
) -> tuple[DistributionSummary, DistributionSummary]:
    """Where the root joint sits, in 3D x-y and on the image plane.

    The x-y summary collects camera-frame (x, y) of every 3D root. The
    image-plane summary collects every image-space 2D root; frames with 3D
    but no 2D are projected with ``intrinsics`` when given (camera frame via
    the principal point, canonical frame via the image center).
    """
    xy, image = [], []
    for seq in sequences:
        root = seq.skeleton.root_index
        for frame in seq.frames:
            if frame.pose_3d is not None:
                xy.append(frame.pose_3d.joints[root, :2])
            if frame.pose_2d is not None and frame.pose_2d.space is Space.IMAGE:
                image.append(frame.pose_2d.joints[root])
            elif frame.pose_3d is not None and intrinsics is not None:
                joint = frame.pose_3d.joints[root]
                centered = frame.pose_3d.frame is Frame.CANONICAL_CAMERA
                ox = intrinsics.width / 2.0 if centered else intrinsics.cx
                oy = intrinsics.height / 2.0 if centered else intrinsics.cy
                image.append(
                    np.array(
                        [
                            intrinsics.fx * joint[0] / joint[2] + ox,
                            intrinsics.fy * joint[1] / joint[2] + oy,
                        ]
                    )
                )
    empty2 = np.zeros((0, 2))
    return (
        DistributionSummary.from_samples(np.array(xy) if xy else empty2),
        DistributionSummary.from_samples(np.array(image) if image else empty2),
    )


def body_orientation_distribution(sequences, skeleton: Skeleton | None = None) -> DistributionSummary:
    """Unit body-facing directions: cross(left hip - right hip, torso - pelvis).

    Frames whose cross product is shorter than EPS_ORIENTATION (hips parallel
    to the spine) yield no direction and are tallied in ``n_degenerate``.

    Args:
        sequences: input sequences, 3D poses required.
        skeleton: overrides each sequence's own skeleton when given.
    """
    directions = []
    degenerate = 0
    for seq in sequences:
        skel = skeleton if skeleton is not None else seq.skeleton
        for frame in seq.frames:
            if frame.pose_3d is None:
                continue
            joints = frame.pose_3d.joints
            across = joints[skel.left_hip_index] - joints[skel.right_hip_index]
            up = joints[skel.torso_index] - joints[skel.root_index]
            cross = np.cross(across, up)
            norm = np.linalg.norm(cross)
            if norm <= EPS_ORIENTATION:
                degenerate += 1
            else:
                directions.append(cross / norm)
    samples = np.array(directions) if directions else np.zeros((0, 3))
    return DistributionSummary.from_samples(samples, n_degenerate=degenerate)


SCATTER_MODES = ("2d", "3d-root-relative")


def joint_scatter_extent(sequences, mode: str) -> DistributionSummary:
    """Pool every joint coordinate of every frame.

    Mode "2d" pools raw 2D joints; mode "3d-root-relative" pools 3D joints
    after subtracting each frame's root, so the summary reflects pose shape
    rather than placement.
    """
    if mode not in SCATTER_MODES:
        raise ValueError(f"mode must be one of {SCATTER_MODES}, got {mode!r}")
    pools = []
    for seq in sequences:
        root = seq.skeleton.root_index
        for frame in seq.frames:
            if mode == "2d" and frame.pose_2d is not None:
                pools.append(frame.pose_2d.joints)
            elif mode == "3d-root-relative" and frame.pose_3d is not None:
                joints = frame.pose_3d.joints
                pools.append(joints - joints[root])
    width = 2 if mode == "2d" else 3
    samples = np.concatenate(pools, axis=0) if pools else np.zeros((0, width))
    return DistributionSummary.from_samples(samples)
