import numpy as np
import pytest

from canonpose.camera import CameraIntrinsics, Frame
from canonpose.synth import (
    DEFAULT_ROOT_REGION,
    Box3,
    SynthConfig,
    consistency_oracle,
    generate_pose_array,
    generate_poses,
    many_to_one_demo,
    pose_rng,
    random_intrinsics,
)


def test_generation_is_bitwise_deterministic(skeleton):
    config = SynthConfig(seed=7, n_poses=20)
    a = generate_pose_array(config, skeleton)
    b = generate_pose_array(config, skeleton)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, generate_pose_array(SynthConfig(seed=8, n_poses=20), skeleton))
    assert not np.array_equal(a, generate_pose_array(config, skeleton, stream=1))


def test_pose_draws_are_independent_of_batch_size(skeleton):
    # Each pose gets its own counter-keyed generator, so the first five poses
    # of a 20-pose batch equal a 5-pose batch bit for bit.
    big = generate_pose_array(SynthConfig(seed=3, n_poses=20), skeleton)
    small = generate_pose_array(SynthConfig(seed=3, n_poses=5), skeleton)
    assert np.array_equal(big[:5], small)


def test_pose_rng_keying():
    assert pose_rng(1, 5).uniform() == pose_rng(1, 5).uniform()
    assert pose_rng(1, 5).uniform() != pose_rng(1, 6).uniform()
    assert pose_rng(1, 5).uniform() != pose_rng(2, 5).uniform()


def test_roots_stay_inside_the_region(skeleton):
    region = Box3((2.0, 1.0, 6.0), (2.5, 1.5, 8.0))
    pts = generate_pose_array(SynthConfig(seed=11, n_poses=300, root_region=region), skeleton)
    assert region.contains(pts[:, skeleton.root_index]).all()
    default = generate_pose_array(SynthConfig(seed=11, n_poses=300), skeleton)
    assert DEFAULT_ROOT_REGION.contains(default[:, skeleton.root_index]).all()


def test_limb_scale_scales_bones(skeleton):
    one = generate_pose_array(SynthConfig(seed=13, n_poses=10), skeleton)
    two = generate_pose_array(SynthConfig(seed=13, n_poses=10, limb_scale=2.0), skeleton)
    # Same seed, same draws: roots coincide and every bone doubles.
    assert np.array_equal(one[:, skeleton.root_index], two[:, skeleton.root_index])
    for parent, child in skeleton.topological_edges:
        bone_one = one[:, child] - one[:, parent]
        bone_two = two[:, child] - two[:, parent]
        assert np.abs(bone_two - 2.0 * bone_one).max() < 1e-13


def test_bone_length_jitter_stays_within_ten_percent(skeleton):
    pts = generate_pose_array(SynthConfig(seed=17, n_poses=500), skeleton)
    for parent, child in skeleton.topological_edges:
        lengths = np.linalg.norm(pts[:, child] - pts[:, parent], axis=-1)
        assert lengths.min() > 0
        # U(-0.1, 0.1) jitter caps the max/min ratio at 1.1/0.9.
        assert lengths.max() / lengths.min() <= 1.1 / 0.9 + 1e-9


def test_generate_poses_wrapper(skeleton):
    config = SynthConfig(seed=19, n_poses=4)
    poses = generate_poses(config, skeleton)
    assert len(poses) == 4
    assert all(p.frame is Frame.CAMERA for p in poses)
    assert np.array_equal(np.stack([p.joints for p in poses]), generate_pose_array(config, skeleton))


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(seed=0, n_poses=0)
    with pytest.raises(ValueError):
        SynthConfig(seed=0, n_poses=1, limb_scale=0.0)
    with pytest.raises(ValueError):
        SynthConfig(seed=0, n_poses=1, root_region=Box3((0, 0, 0.2), (1, 1, 1)))
    with pytest.raises(ValueError):
        SynthConfig(seed=-1, n_poses=1)
    with pytest.raises(ValueError):
        Box3((1, 0, 0), (0, 1, 1))


def test_random_intrinsics_ranges():
    rng = np.random.default_rng(23)
    for _ in range(50):
        intr = random_intrinsics(rng)
        assert 640 <= intr.width <= 1920
        assert 480 <= intr.height <= 1200
        assert 0.8 <= intr.fx / intr.width <= 1.6
        assert 0.4 <= intr.cx / intr.width <= 0.6
    a = random_intrinsics(np.random.default_rng(5))
    b = random_intrinsics(np.random.default_rng(5))
    assert a == b


def test_consistency_oracle_passes_on_generated_poses(skeleton, intrinsics):
    pts = generate_pose_array(SynthConfig(seed=29, n_poses=200), skeleton)
    report = consistency_oracle(pts, intrinsics, skeleton)
    assert report.passed
    assert report.n_poses == 200
    assert report.max_discrepancy < report.threshold
    assert report.failed_indices == ()
    d = report.to_dict()
    assert d["passed"] is True and d["n_flagged"] == 0


def test_consistency_oracle_negative_control(skeleton, intrinsics):
    pts = generate_pose_array(SynthConfig(seed=29, n_poses=50), skeleton)
    wrong = CameraIntrinsics(
        fx=intrinsics.fx * 1.2,
        fy=intrinsics.fy,
        cx=intrinsics.cx,
        cy=intrinsics.cy,
        width=intrinsics.width,
        height=intrinsics.height,
    )
    report = consistency_oracle(pts, intrinsics, skeleton, intrinsics_2d_path=wrong)
    assert not report.passed
    assert report.n_flagged == 50


def test_consistency_oracle_isolates_failing_poses(skeleton, intrinsics):
    pts = generate_pose_array(SynthConfig(seed=31, n_poses=6), skeleton)
    pts = pts.copy()
    pts[2, :, 2] -= 20.0
    report = consistency_oracle(pts, intrinsics, skeleton)
    assert report.failed_indices == (2,)
    assert not report.passed
    assert report.per_pose_max.shape == (5,)
    assert report.n_poses == 6
    assert report.n_flagged == 0  # the healthy poses still agree


def test_consistency_oracle_accepts_pose_lists_and_empty(skeleton, intrinsics):
    poses = generate_poses(SynthConfig(seed=37, n_poses=3), skeleton)
    assert consistency_oracle(poses, intrinsics, skeleton).passed
    empty = consistency_oracle([], intrinsics, skeleton)
    assert empty.n_poses == 0 and empty.passed


def test_many_to_one_demo_contrast(skeleton, intrinsics):
    pts = generate_pose_array(SynthConfig(seed=41, n_poses=1), skeleton)[0]
    base = pts - pts[skeleton.root_index]
    positions = np.array(
        [[0.0, 0.0, 4.0], [0.9, 0.0, 4.0], [-0.9, 0.6, 4.0], [0.4, -0.5, 4.0]]
    )
    report = many_to_one_demo(base, positions, intrinsics, skeleton)
    assert report.n_positions == 4
    # The same pose looks very different conventionally, far less so
    # canonically, and the canonical root is pinned at exactly zero.
    assert report.conventional_dispersion > 5 * report.canonical_dispersion
    assert report.conventional_root_dispersion > 0.1
    assert report.canonical_root_max_abs == 0.0
    assert report.residual_max_error < 1e-9


def test_many_to_one_demo_identical_placements(skeleton, intrinsics):
    pts = generate_pose_array(SynthConfig(seed=43, n_poses=1), skeleton)[0]
    base = pts - pts[skeleton.root_index]
    report = many_to_one_demo(base, [[0.0, 0.0, 4.0], [0.0, 0.0, 4.0]], intrinsics, skeleton)
    assert report.conventional_dispersion == 0.0
    assert report.canonical_dispersion == 0.0
    assert report.residual_max_error < 1e-9


def test_many_to_one_demo_validation(skeleton, intrinsics):
    pts = generate_pose_array(SynthConfig(seed=47, n_poses=1), skeleton)[0]
    with pytest.raises(ValueError, match="root-relative"):
        many_to_one_demo(pts, [[0.0, 0.0, 4.0]], intrinsics, skeleton)
    base = pts - pts[skeleton.root_index]
    with pytest.raises(ValueError, match="Z"):
        many_to_one_demo(base, [[0.0, 0.0, -1.0]], intrinsics, skeleton)
