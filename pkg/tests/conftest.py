import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from canonpose.camera import CameraIntrinsics
from canonpose.skeleton import H36M17
from canonpose.synth import SynthConfig, generate_pose_array

settings.register_profile(
    "suite", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("suite")


@pytest.fixture
def intrinsics():
    # Deliberately off-center principal point and fx != fy, so nothing in the
    # suite accidentally relies on cx = W/2 or square pixels.
    return CameraIntrinsics(
        fx=1150.0, fy=1080.0, cx=512.5, cy=488.0, width=1000.0, height=1000.0
    )


@pytest.fixture
def skeleton():
    return H36M17


@pytest.fixture
def pose_batch():
    """(n, 17, 3) camera-frame poses, deterministic per (seed, stream)."""

    def make(n: int, seed: int = 0, stream: int = 0) -> np.ndarray:
        return generate_pose_array(SynthConfig(seed=seed, n_poses=n), H36M17, stream=stream)

    return make


@pytest.fixture
def rotation_factory():
    """Uniform-ish random proper rotation matrices."""

    def make(rng) -> np.ndarray:
        rng = np.random.default_rng(rng)
        q, r = np.linalg.qr(rng.standard_normal((3, 3)))
        q = q * np.sign(np.diag(r))
        if np.linalg.det(q) < 0:
            q[:, 2] *= -1.0
        return q

    return make
