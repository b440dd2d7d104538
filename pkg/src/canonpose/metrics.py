"""Pose-error metrics: MPJPE and Procrustes-aligned MPJPE.

Both metrics expect root-relative poses and are computed in meters; the CLI
converts to millimeters at the user boundary. ``mpjpe`` is the plain mean
Euclidean joint distance with no internal re-centering or alignment;
``p_mpjpe`` first finds, per frame, the similarity transform (scale, proper
rotation, translation) minimizing the summed squared joint distance, then
averages the remaining distances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Pose3D, _check_rotation_matrix
from .errors import DegenerateShapeError, DimensionMismatchError


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    """A similarity map p -> scale * rotation @ p + translation."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        scale = float(self.scale)
        if not np.isfinite(scale) or scale <= 0:
            raise ValueError(f"scale must be positive and finite, got {scale!r}")
        rot = np.array(self.rotation, dtype=np.float64)
        if rot.shape != (3, 3) or not np.isfinite(rot).all():
            raise ValueError("rotation must be a finite 3x3 matrix")
        _check_rotation_matrix(rot, "similarity rotation")
        trans = np.array(self.translation, dtype=np.float64).reshape(-1)
        if trans.shape != (3,) or not np.isfinite(trans).all():
            raise ValueError("translation must be a finite 3-vector")
        rot.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return self.scale * (pts @ self.rotation.T) + self.translation


def _as_frames(poses, name: str) -> np.ndarray:
    """Coerce a Pose3D, a sequence of Pose3D, or a (J,3)/(T,J,3) array to (T, J, 3)."""
    if isinstance(poses, Pose3D):
        return poses.joints[None]
    if isinstance(poses, np.ndarray):
        arr = np.asarray(poses, dtype=np.float64)
    elif isinstance(poses, (list, tuple)) and poses and isinstance(poses[0], Pose3D):
        arr = np.stack([pose.joints for pose in poses])
    else:
        arr = np.asarray(poses, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[-1] != 3:
        raise DimensionMismatchError(f"{name} must have shape (T, J, 3), got {arr.shape}")
    return arr


def mpjpe(pred, gt) -> float:
    """Mean per-joint position error in meters.

    The plain mean over frames and joints of the Euclidean distance between
    corresponding joints. Inputs are expected root-relative; no re-centering
    is applied here.

    Args:
        pred, gt: Pose3D, sequence of Pose3D, or array of shape (J, 3) or
            (T, J, 3); shapes must match.
    """
    p = _as_frames(pred, "pred")
    g = _as_frames(gt, "gt")
    if p.shape != g.shape:
        raise DimensionMismatchError(f"pred shape {p.shape} != gt shape {g.shape}")
    return float(np.mean(np.linalg.norm(p - g, axis=-1)))


def _batch_similarity_align(pred: np.ndarray, gt: np.ndarray):
    """Per-frame least-squares similarity alignment of pred onto gt.

    Args:
        pred, gt: (T, J, 3) with J >= 3.

    Returns:
        (aligned pred (T, J, 3), scales (T,), rotations (T, 3, 3),
        translations (T, 3)).
    """
    t, j = pred.shape[0], pred.shape[1]
    if j < 3:
        raise DimensionMismatchError(f"similarity alignment needs at least 3 joints, got {j}")
    mu_p = pred.mean(axis=1)
    mu_g = gt.mean(axis=1)
    p0 = pred - mu_p[:, None]
    g0 = gt - mu_g[:, None]

    # Collinear (rank < 2) clouds have no unique alignment.
    for name, centered in (("pred", p0), ("gt", g0)):
        sv = np.linalg.svd(centered, compute_uv=False)
        tol = max(j, 3) * np.finfo(np.float64).eps * sv[:, 0]
        degenerate = (sv[:, 1] <= tol) | (sv[:, 0] == 0.0)
        if degenerate.any():
            raise DegenerateShapeError(
                f"{name} joints are collinear in {int(degenerate.sum())} frame(s)",
                indices=np.nonzero(degenerate)[0],
            )

    cov = np.einsum("tji,tjk->tik", p0, g0)
    u, s, vt = np.linalg.svd(cov)
    sign = np.sign(np.linalg.det(u @ vt))
    vt_fixed = vt.copy()
    vt_fixed[:, 2, :] *= sign[:, None]
    rotations = np.matmul(vt_fixed.transpose(0, 2, 1), u.transpose(0, 2, 1))

    var_p = np.einsum("tji,tji->t", p0, p0)
    scales = (s[:, 0] + s[:, 1] + sign * s[:, 2]) / var_p
    translations = mu_g - scales[:, None] * np.einsum("tij,tj->ti", rotations, mu_p)
    aligned = scales[:, None, None] * np.einsum("tij,tkj->tki", rotations, p0) + mu_g[:, None]
    return aligned, scales, rotations, translations


def procrustes_align(pred, gt) -> tuple:
    """Best similarity alignment of one predicted pose onto ground truth.

    Minimizes the summed squared joint distance over scale, proper rotation
    (reflections excluded), and translation, in closed form via the singular
    decomposition of the cross-covariance.

    Args:
        pred, gt: single poses as Pose3D or (J, 3) arrays, J >= 3, not all
            joints collinear.

    Returns:
        (aligned pred, SimilarityTransform). The aligned pose is returned as
        a Pose3D when ``pred`` was one (same frame tag), else as an array.
    """
    p = _as_frames(pred, "pred")
    g = _as_frames(gt, "gt")
    if p.shape[0] != 1 or g.shape[0] != 1:
        raise DimensionMismatchError("procrustes_align takes single poses; use p_mpjpe for sequences")
    if p.shape != g.shape:
        raise DimensionMismatchError(f"pred shape {p.shape} != gt shape {g.shape}")
    aligned, scales, rotations, translations = _batch_similarity_align(p, g)
    transform = SimilarityTransform(scales[0], rotations[0], translations[0])
    if isinstance(pred, Pose3D):
        return Pose3D(aligned[0], pred.frame), transform
    return aligned[0], transform


def p_mpjpe(pred, gt) -> float:
    """MPJPE after per-frame Procrustes alignment, in meters.

    Never exceeds ``mpjpe`` on the same input: the identity transform is
    always an alignment candidate.
    """
    p = _as_frames(pred, "pred")
    g = _as_frames(gt, "gt")
    if p.shape != g.shape:
        raise DimensionMismatchError(f"pred shape {p.shape} != gt shape {g.shape}")
    aligned, _, _, _ = _batch_similarity_align(p, g)
    return float(np.mean(np.linalg.norm(aligned - g, axis=-1)))
