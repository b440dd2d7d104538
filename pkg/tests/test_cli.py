import dataclasses
import json

import numpy as np
import pytest

from canonpose.camera import Pose3D
from canonpose.cli import run
from canonpose.dataset import load_sequences, save_sequences


@pytest.fixture
def camera_file(tmp_path, intrinsics):
    path = tmp_path / "camera.json"
    path.write_text(json.dumps(intrinsics.to_dict()))
    return str(path)


def synth_file(tmp_path, name="poses.ndjson", count=10, seed=0, camera=None):
    path = tmp_path / name
    argv = ["synth", "--output", str(path), "--count", str(count), "--seed", str(seed)]
    if camera:
        argv += ["--camera", camera]
    assert run(argv) == 0
    return str(path)


def test_help_exits_zero(capsys):
    assert run(["--help"]) == 0
    assert "canonicalize" in capsys.readouterr().out
    for sub in ("canonicalize", "stats", "eval", "synth", "study", "window"):
        assert run([sub, "--help"]) == 0
        assert "--" in capsys.readouterr().out


def test_usage_errors_exit_one(capsys):
    assert run([]) == 1
    assert run(["frobnicate"]) == 1
    assert run(["canonicalize", "--input", "x"]) == 1  # missing --camera
    assert run(["eval", "--pred", "x", "--gt", "y", "--metric", "nope"]) == 1
    err = capsys.readouterr().err
    assert "error:" in err


def test_missing_file_exits_two(tmp_path, camera_file, capsys):
    rc = run(["canonicalize", "--input", str(tmp_path / "absent.ndjson"), "--camera", camera_file])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_synth_is_deterministic_and_loadable(tmp_path, skeleton, camera_file):
    a = synth_file(tmp_path, "a.ndjson", camera=camera_file)
    b = synth_file(tmp_path, "b.ndjson", camera=camera_file)
    assert (tmp_path / "a.ndjson").read_text() == (tmp_path / "b.ndjson").read_text()
    seqs = load_sequences(a, skeleton)
    assert len(seqs) == 1
    assert seqs[0].key == ("synth", "seed0", "cam0")
    assert seqs[0].n_frames == 10
    assert seqs[0].joints_2d() is not None
    bare = load_sequences(synth_file(tmp_path, "c.ndjson", seed=5), skeleton)[0]
    assert bare.key[1] == "seed5"
    assert bare.joints_2d() is None


def test_synth_config_overrides(tmp_path, skeleton):
    config = tmp_path / "gen.json"
    config.write_text(json.dumps({"n_poses": 4, "root_region": {"low": [0, 0, 6], "high": [0.1, 0.1, 7]}}))
    path = tmp_path / "synth.ndjson"
    assert run(["synth", "--output", str(path), "--config", str(config)]) == 0
    seq = load_sequences(path, skeleton)[0]
    assert seq.n_frames == 4  # config n_poses beats the --count default
    assert seq.joints_3d()[:, skeleton.root_index, 2].min() >= 6.0
    config.write_text(json.dumps({"bogus": 1}))
    assert run(["synth", "--output", str(path), "--config", str(config)]) == 1
    config.write_text(json.dumps({"root_region": {"low": [0, 0, 6]}}))
    assert run(["synth", "--output", str(path), "--config", str(config)]) == 1


def test_canonicalize_centers_roots(tmp_path, skeleton, intrinsics, camera_file):
    data = synth_file(tmp_path, camera=camera_file)
    out = tmp_path / "canon.ndjson"
    assert run(["canonicalize", "--input", data, "--camera", camera_file, "--output", str(out)]) == 0
    seqs = load_sequences(out, skeleton)
    roots = seqs[0].joints_2d()[:, skeleton.root_index]
    assert np.all(roots == np.array([intrinsics.width / 2.0, intrinsics.height / 2.0]))
    assert seqs[0].records is not None
    # Re-canonicalizing canonical data is a data error, not a crash.
    assert run(["canonicalize", "--input", str(out), "--camera", camera_file]) == 2


def test_canonicalize_2d_mode(tmp_path, skeleton, camera_file):
    data = synth_file(tmp_path, camera=camera_file)
    out3 = tmp_path / "c3.ndjson"
    out2 = tmp_path / "c2.ndjson"
    assert run(["canonicalize", "--input", data, "--camera", camera_file, "--output", str(out3)]) == 0
    assert run(["canonicalize", "--input", data, "--camera", camera_file, "--mode", "2d", "--output", str(out2)]) == 0
    canon3 = load_sequences(out3, skeleton)[0]
    canon2 = load_sequences(out2, skeleton)[0]
    assert np.abs(canon2.joints_2d() - canon3.joints_2d()).max() < 1e-9
    # The 2d path leaves the 3D channel as it came in.
    original = load_sequences(data, skeleton)[0]
    assert np.array_equal(canon2.joints_3d(), original.joints_3d())


def test_canonicalize_threads_do_not_change_bytes(tmp_path, camera_file):
    data = synth_file(tmp_path, count=30, camera=camera_file)
    outputs = []
    for threads in ("1", "3"):
        out = tmp_path / f"t{threads}.ndjson"
        rc = run(
            ["canonicalize", "--input", data, "--camera", camera_file, "--threads", threads, "--output", str(out)]
        )
        assert rc == 0
        outputs.append(out.read_text())
    assert outputs[0] == outputs[1]


def test_canonicalize_applies_extrinsics(tmp_path, skeleton, intrinsics, camera_file, rotation_factory):
    data = synth_file(tmp_path, camera=camera_file)
    rotation = rotation_factory(3)
    translation = np.array([0.1, -0.2, 0.3])
    seqs = load_sequences(data, skeleton)
    world_frames = []
    for pair in seqs[0].frames:
        # World joints chosen so that R @ w + t reproduces the camera joints.
        world = (pair.pose_3d.joints - translation) @ rotation
        world_frames.append(dataclasses.replace(pair, pose_3d=Pose3D(world, pair.pose_3d.frame)))
    world_path = tmp_path / "world.ndjson"
    save_sequences([dataclasses.replace(seqs[0], frames=tuple(world_frames))], world_path)

    extrinsic_camera = tmp_path / "camera_rt.json"
    payload = intrinsics.to_dict()
    payload["R"] = rotation.ravel().tolist()
    payload["t"] = translation.tolist()
    extrinsic_camera.write_text(json.dumps(payload))

    out_cam = tmp_path / "from_camera.ndjson"
    out_world = tmp_path / "from_world.ndjson"
    assert run(["canonicalize", "--input", data, "--camera", camera_file, "--output", str(out_cam)]) == 0
    assert run(["canonicalize", "--input", str(world_path), "--camera", str(extrinsic_camera), "--output", str(out_world)]) == 0
    a = load_sequences(out_cam, skeleton)[0]
    b = load_sequences(out_world, skeleton)[0]
    assert np.abs(a.joints_3d() - b.joints_3d()).max() < 1e-9
    assert np.abs(a.joints_2d() - b.joints_2d()).max() < 1e-6


def test_eval_offset_joint(tmp_path, skeleton, capsys):
    gt_path = synth_file(tmp_path, "gt.ndjson", count=5)
    seqs = load_sequences(gt_path, skeleton)
    moved_frames = []
    for pair in seqs[0].frames:
        joints = pair.pose_3d.joints.copy()
        joints[skeleton.root_index + 1, 0] += 0.05
        moved_frames.append(dataclasses.replace(pair, pose_3d=Pose3D(joints, pair.pose_3d.frame)))
    pred_path = tmp_path / "pred.ndjson"
    save_sequences([dataclasses.replace(seqs[0], frames=tuple(moved_frames))], pred_path)

    assert run(["eval", "--pred", str(pred_path), "--gt", gt_path]) == 0
    out = capsys.readouterr().out.strip()
    expected_mm = 0.05 / skeleton.n_joints * 1000.0
    assert out == f"mpjpe {expected_mm:.6f} mm"

    assert run(["eval", "--pred", gt_path, "--gt", gt_path]) == 0
    assert capsys.readouterr().out.strip() == "mpjpe 0.000000 mm"

    assert run(["eval", "--pred", str(pred_path), "--gt", gt_path, "--metric", "pmpjpe"]) == 0
    assert capsys.readouterr().out.startswith("pmpjpe ")


def test_eval_key_mismatch(tmp_path, capsys):
    a = synth_file(tmp_path, "a.ndjson", seed=1)
    b = synth_file(tmp_path, "b.ndjson", seed=2)  # different action name
    assert run(["eval", "--pred", a, "--gt", b]) == 2
    assert "missing from ground truth" in capsys.readouterr().err


def test_stats_json_and_csv(tmp_path, camera_file, capsys):
    data = synth_file(tmp_path, camera=camera_file)
    csv_dir = tmp_path / "csv"
    out = tmp_path / "stats.json"
    rc = run(["stats", "--input", data, "--camera", camera_file, "--output", str(out), "--csv", str(csv_dir)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert set(doc) == {
        "pelvis_xy_m",
        "pelvis_image_px",
        "body_orientation",
        "joint_scatter_2d_px",
        "joint_scatter_3d_root_relative_m",
    }
    assert doc["pelvis_xy_m"]["count"] == 10
    assert {p.name for p in csv_dir.iterdir()} == {f"{k}.csv" for k in doc}
    # Without --output the document goes to stdout.
    assert run(["stats", "--input", data]) == 0
    assert json.loads(capsys.readouterr().out)["pelvis_xy_m"]["count"] == 10


def test_window_command(tmp_path, skeleton):
    data = synth_file(tmp_path, count=10)
    out = tmp_path / "windows.ndjson"
    rc = run(
        ["window", "--input", data, "--window-length", "3", "--window-stride", "4", "--pad", "repeat-last", "--output", str(out)]
    )
    assert rc == 0
    seqs = load_sequences(out, skeleton)
    assert [seq.action for seq in seqs] == ["seed0#w0000", "seed0#w0001", "seed0#w0002"]
    assert [f.index for f in seqs[2].frames] == [8, 9, 9]
    assert run(["window", "--input", data, "--window-length", "0", "--window-stride", "4"]) == 1


def test_study_command(tmp_path, capsys):
    config = tmp_path / "study.json"
    config.write_text(json.dumps({"n_train": 600, "n_test": 200}))
    out_a = tmp_path / "a.json"
    out_b = tmp_path / "b.json"
    assert run(["study", "--config", str(config), "--output", str(out_a)]) == 0
    assert run(["study", "--config", str(config), "--output", str(out_b), "--threads", "3"]) == 0
    assert out_a.read_text() == out_b.read_text()
    doc = json.loads(out_a.read_text())
    assert set(doc) == {"config", "conventional", "canonical", "mpjpe_ratio_canonical_over_conventional"}
    assert doc["config"]["n_train"] == 600

    assert run(["study", "--config", str(config), "--seed", "9", "--output", str(out_b)]) == 0
    assert json.loads(out_b.read_text())["config"]["seed"] == 9
    assert out_b.read_text() != out_a.read_text()

    config.write_text(json.dumps({"verbosity": 3}))
    assert run(["study", "--config", str(config)]) == 1
    assert "unknown study fields" in capsys.readouterr().err
