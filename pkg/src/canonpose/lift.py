"""Linear 2D-to-3D lifting and the canonical-vs-conventional study.

The lifter is deliberately the weakest model that can work: one affine map
from flattened screen-normalized 2D joints to flattened root-relative 3D
joints, fit by ridge regression. Its point is not accuracy but sensitivity —
an affine map cannot absorb the placement-dependent distortion left in
conventional 2D inputs, so the gap between training on conventional and on
canonical inputs isolates what canonicalization contributes.

The study trains both variants on identical synthetic poses and identical
noise draws, then evaluates on poses whose roots sit in a region the
training set never covered. The canonical arm is evaluated end to end the
way it would be deployed: canonicalize the observed 2D, predict, rotate the
prediction back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics, Frame, Pose2D, Pose3D, Space, batch_project, batch_screen_normalize
from .canonical import batch_back_transform, batch_canonicalize_2d, batch_canonicalize_3d, batch_project_centered
from .errors import DimensionMismatchError, FrameMismatchError, SingularMatrixError
from .jsonfmt import dumps
from .metrics import mpjpe, p_mpjpe
from .skeleton import get_skeleton
from .synth import Box3, SynthConfig, generate_pose_array, pose_rng

MAPPING_KINDS = ("conventional", "canonical")

# Pose streams and noise streams for the study, all derived from one seed.
_STREAM_TRAIN = 1
_STREAM_TEST = 2
_NOISE_TRAIN_INDEX = 3 << 48
_NOISE_TEST_INDEX = 4 << 48


@dataclass(frozen=True, eq=False)
class LinearLifter:
    """Affine map from flattened 2D inputs to flattened 3D outputs.

    ``weights`` has shape (2J + 1, 3J); the last row is the bias. Inputs are
    screen-normalized 2D joints, outputs root-relative 3D joints in the frame
    named by ``mapping_kind`` ("conventional" = camera frame, "canonical" =
    canonical camera frame).
    """

    weights: np.ndarray
    ridge_lambda: float
    mapping_kind: str

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        if weights.ndim != 2 or (weights.shape[0] - 1) % 2 or weights.shape[1] % 3:
            raise DimensionMismatchError(f"weights must have shape (2J + 1, 3J), got {weights.shape}")
        if (weights.shape[0] - 1) // 2 != weights.shape[1] // 3:
            raise DimensionMismatchError(f"weights shape {weights.shape} mixes two joint counts")
        if not np.isfinite(weights).all():
            raise ValueError("weights must be finite")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        if not (np.isfinite(self.ridge_lambda) and self.ridge_lambda >= 0):
            raise ValueError(f"ridge_lambda must be >= 0, got {self.ridge_lambda!r}")
        if self.mapping_kind not in MAPPING_KINDS:
            raise ValueError(f"mapping_kind must be one of {MAPPING_KINDS}, got {self.mapping_kind!r}")

    @property
    def n_joints(self) -> int:
        return self.weights.shape[1] // 3


def _fit_arrays(x: np.ndarray, y: np.ndarray, ridge_lambda: float) -> np.ndarray:
    """Ridge-fit (2J + 1, 3J) weights from (n, 2J) inputs and (n, 3J) targets.

    Inputs are standardized per feature for conditioning and the solution is
    folded back to raw coordinates. The penalty applies to every weight,
    bias included, so lambda -> inf drives the whole map to zero rather than
    to a constant predictor.
    """
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    design = np.concatenate([(x - mean) / std, np.ones((x.shape[0], 1))], axis=1)

    gram = design.T @ design + ridge_lambda * np.eye(design.shape[1])
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(
            "normal equations are singular; add ridge_lambda > 0 or provide richer training pairs"
        ) from exc
    solution = np.linalg.solve(chol.T, np.linalg.solve(chol, design.T @ y))

    weights = np.empty((x.shape[1] + 1, y.shape[1]))
    weights[:-1] = solution[:-1] / std[:, None]
    weights[-1] = solution[-1] - (mean / std) @ solution[:-1]
    return weights


def fit(pairs, ridge_lambda: float, mapping_kind: str = "conventional") -> LinearLifter:
    """Fit a lifter from (Pose2D, Pose3D) pairs.

    Args:
        pairs: iterable of (Pose2D, Pose3D); the 2D poses must be
            screen-normalized and the 3D poses root-relative.
        ridge_lambda: L2 penalty on all weights; 0 requires the normal
            equations to be non-singular.
        mapping_kind: which frame the lifter's outputs live in.

    Returns:
        The fitted LinearLifter.

    Raises:
        DimensionMismatchError: fewer pairs than unknowns per output column,
            or inconsistent joint counts.
        FrameMismatchError: a 2D pose is not screen-normalized.
        SingularMatrixError: ridge_lambda == 0 and the design is degenerate.
    """
    pairs = list(pairs)
    if not pairs:
        raise DimensionMismatchError("need at least one training pair")
    n_joints = pairs[0][0].n_joints
    xs = np.empty((len(pairs), 2 * n_joints))
    ys = np.empty((len(pairs), 3 * n_joints))
    for i, (pose2d, pose3d) in enumerate(pairs):
        if pose2d.space is not Space.SCREEN_NORMALIZED:
            raise FrameMismatchError(f"pair {i}: expected screen-normalized 2D input, got {pose2d.space.value}")
        if pose2d.n_joints != n_joints or pose3d.n_joints != n_joints:
            raise DimensionMismatchError(
                f"pair {i}: joint count {pose2d.n_joints}/{pose3d.n_joints} does not match {n_joints}"
            )
        xs[i] = pose2d.joints.ravel()
        ys[i] = pose3d.joints.ravel()
    if len(pairs) < 2 * n_joints + 1:
        raise DimensionMismatchError(f"need at least {2 * n_joints + 1} pairs for {n_joints} joints, got {len(pairs)}")
    lifter = LinearLifter(_fit_arrays(xs, ys, float(ridge_lambda)), float(ridge_lambda), mapping_kind)
    return lifter


def _predict_arrays(lifter: LinearLifter, x: np.ndarray) -> np.ndarray:
    """(n, 2J) flattened inputs -> (n, J, 3) predictions."""
    flat = x @ lifter.weights[:-1] + lifter.weights[-1]
    return flat.reshape(x.shape[0], lifter.n_joints, 3)


def predict(lifter: LinearLifter, pose2d: Pose2D) -> Pose3D:
    """Lift one screen-normalized 2D pose to a root-relative 3D pose."""
    if pose2d.space is not Space.SCREEN_NORMALIZED:
        raise FrameMismatchError(f"expected screen-normalized input, got {pose2d.space.value}")
    if pose2d.n_joints != lifter.n_joints:
        raise DimensionMismatchError(f"lifter expects {lifter.n_joints} joints, got {pose2d.n_joints}")
    joints = _predict_arrays(lifter, pose2d.joints.reshape(1, -1))[0]
    frame = Frame.CAMERA if lifter.mapping_kind == "conventional" else Frame.CANONICAL_CAMERA
    return Pose3D(joints, frame)


# ---------------------------------------------------------------------------
# Study.
# ---------------------------------------------------------------------------

DEFAULT_TRAIN_REGION = Box3((-0.15, -0.15, 3.0), (0.15, 0.15, 5.0))
# Test roots sit well off the optical axis, outside anything the training
# distribution covered (>= 0.9 m planar offset at the nearest corner, up to
# ~35 degrees off-axis at the far corner).
DEFAULT_TEST_REGION = Box3((0.8, 0.5, 3.0), (1.8, 1.1, 5.0))
DEFAULT_STUDY_CAMERA = CameraIntrinsics(
    fx=1100.0, fy=1100.0, cx=510.0, cy=505.0, width=1000.0, height=1000.0
)


@dataclass(frozen=True, eq=False)
class LiftingStudyConfig:
    """Study parameters; defaults reproduce the desk-scale comparison.

    The principal point is deliberately off-center so nothing silently
    relies on cx = W/2. Train and test regions are not required to be
    disjoint — the sanity control evaluates on the training region.
    """

    train_root_region: Box3 = DEFAULT_TRAIN_REGION
    test_root_region: Box3 = DEFAULT_TEST_REGION
    noise_sigma: float = 2.0
    n_train: int = 20000
    n_test: int = 5000
    seed: int = 0
    ridge_lambda: float = 1e-4
    camera: CameraIntrinsics = DEFAULT_STUDY_CAMERA
    limb_scale: float = 1.0
    skeleton_name: str = "h36m17"

    def __post_init__(self):
        for name, region in (("train", self.train_root_region), ("test", self.test_root_region)):
            if region.low[2] <= 0.5:
                raise ValueError(f"{name}_root_region must keep roots at Z > 0.5 m")
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("n_train and n_test must be >= 1")
        if not (np.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma!r}")
        if not (np.isfinite(self.ridge_lambda) and self.ridge_lambda >= 0):
            raise ValueError(f"ridge_lambda must be >= 0, got {self.ridge_lambda!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")
        object.__setattr__(self, "seed", int(self.seed))
        get_skeleton(self.skeleton_name)

    def to_dict(self) -> dict:
        return {
            "train_root_region": self.train_root_region.to_dict(),
            "test_root_region": self.test_root_region.to_dict(),
            "noise_sigma": self.noise_sigma,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "seed": self.seed,
            "ridge_lambda": self.ridge_lambda,
            "camera": self.camera.to_dict(),
            "limb_scale": self.limb_scale,
            "skeleton": self.skeleton_name,
        }


@dataclass(frozen=True, eq=False)
class ArmResult:
    """Metrics for one mapping variant, millimeters throughout."""

    train_mpjpe_mm: float
    train_mpjpe_std_mm: float
    test_mpjpe_mm: float
    test_pmpjpe_mm: float
    test_mpjpe_before_back_transform_mm: float | None = None

    def to_dict(self) -> dict:
        out = {
            "train_mpjpe_mm": self.train_mpjpe_mm,
            "train_mpjpe_std_mm": self.train_mpjpe_std_mm,
            "test_mpjpe_mm": self.test_mpjpe_mm,
            "test_pmpjpe_mm": self.test_pmpjpe_mm,
        }
        if self.test_mpjpe_before_back_transform_mm is not None:
            out["test_mpjpe_before_back_transform_mm"] = self.test_mpjpe_before_back_transform_mm
        return out


@dataclass(frozen=True, eq=False)
class StudyReport:
    config: LiftingStudyConfig
    conventional: ArmResult
    canonical: ArmResult

    @property
    def mpjpe_ratio(self) -> float:
        """Canonical over conventional test MPJPE; < 1 favors canonical."""
        return self.canonical.test_mpjpe_mm / self.conventional.test_mpjpe_mm

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "conventional": self.conventional.to_dict(),
            "canonical": self.canonical.to_dict(),
            "mpjpe_ratio_canonical_over_conventional": self.mpjpe_ratio,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict(), indent=2) + "\n"


def _per_frame_errors(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    return np.linalg.norm(pred - gt, axis=-1).mean(axis=-1)


def run_study(config: LiftingStudyConfig) -> StudyReport:
    """Run the full comparison; byte-identical reports for identical configs.

    Both arms share the same pose draws and the same 2D noise draws, so the
    only difference between them is the input representation. The canonical
    arm's test path mirrors deployment: canonicalize observed pixels (no 3D
    available), lift, rotate back into the camera frame, then score against
    the root-relative ground truth.
    """
    skeleton = get_skeleton(config.skeleton_name)
    intr = config.camera
    root = skeleton.root_index
    n_joints = skeleton.n_joints

    def poses_for(region: Box3, n: int, stream: int) -> np.ndarray:
        synth = SynthConfig(seed=config.seed, n_poses=n, limb_scale=config.limb_scale, root_region=region)
        return generate_pose_array(synth, skeleton, stream=stream)

    train = poses_for(config.train_root_region, config.n_train, _STREAM_TRAIN)
    test = poses_for(config.test_root_region, config.n_test, _STREAM_TEST)
    noise_train = config.noise_sigma * pose_rng(config.seed, _NOISE_TRAIN_INDEX).standard_normal(
        (config.n_train, n_joints, 2)
    )
    noise_test = config.noise_sigma * pose_rng(config.seed, _NOISE_TEST_INDEX).standard_normal(
        (config.n_test, n_joints, 2)
    )

    def flatten2(pixels: np.ndarray) -> np.ndarray:
        return batch_screen_normalize(pixels, intr).reshape(pixels.shape[0], -1)

    # Conventional arm: noisy pixels as observed, targets root-relative.
    x_conv = flatten2(batch_project(train, intr) + noise_train)
    y_conv = (train - train[:, root : root + 1]).reshape(config.n_train, -1)

    # Canonical arm: same noise magnitude applied to the canonical pixels.
    canon_train, _, depths = batch_canonicalize_3d(train, root)
    x_canon = flatten2(batch_project_centered(canon_train, intr) + noise_train)
    anchors = np.zeros((config.n_train, 1, 3))
    anchors[:, 0, 2] = depths
    y_canon = (canon_train - anchors).reshape(config.n_train, -1)

    lifter_conv = LinearLifter(_fit_arrays(x_conv, y_conv, config.ridge_lambda), config.ridge_lambda, "conventional")
    lifter_canon = LinearLifter(_fit_arrays(x_canon, y_canon, config.ridge_lambda), config.ridge_lambda, "canonical")

    def train_stats(lifter: LinearLifter, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
        errors = _per_frame_errors(_predict_arrays(lifter, x), y.reshape(-1, n_joints, 3))
        return float(errors.mean()), float(errors.std())

    conv_train_mean, conv_train_std = train_stats(lifter_conv, x_conv, y_conv)
    canon_train_mean, canon_train_std = train_stats(lifter_canon, x_canon, y_canon)

    # Shared test observations: the detector sees the same noisy pixels no
    # matter which lifter runs behind it.
    observed = batch_project(test, intr) + noise_test
    gt_rel = test - test[:, root : root + 1]

    pred_conv = _predict_arrays(lifter_conv, flatten2(observed))

    canon_pix, rotations, _ = batch_canonicalize_2d(observed, intr, root)
    pred_canon = _predict_arrays(lifter_canon, flatten2(canon_pix))
    # Root depth is irrelevant to the back-rotated relative pose; zero keeps
    # the test path honest about not knowing it.
    pred_back = batch_back_transform(pred_canon, rotations, np.zeros(config.n_test))

    mm = 1000.0
    conventional = ArmResult(
        train_mpjpe_mm=conv_train_mean * mm,
        train_mpjpe_std_mm=conv_train_std * mm,
        test_mpjpe_mm=mpjpe(pred_conv, gt_rel) * mm,
        test_pmpjpe_mm=p_mpjpe(pred_conv, gt_rel) * mm,
    )
    canonical = ArmResult(
        train_mpjpe_mm=canon_train_mean * mm,
        train_mpjpe_std_mm=canon_train_std * mm,
        test_mpjpe_mm=mpjpe(pred_back, gt_rel) * mm,
        test_pmpjpe_mm=p_mpjpe(pred_back, gt_rel) * mm,
        test_mpjpe_before_back_transform_mm=mpjpe(pred_canon, gt_rel) * mm,
    )
    return StudyReport(config=config, conventional=conventional, canonical=canonical)
