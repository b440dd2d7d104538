"""Batch command line front end.

One executable, six subcommands: canonicalize, stats, eval, synth, study,
window. All dataset I/O is NDJSON (one record per frame); reports are JSON.
Units at this boundary are millimeters for metrics and pixels for 2D; all
internal math runs in meters.

Exit codes: 0 success, 1 validation error (bad flags or configuration),
2 data error (unreadable or inconsistent input files, geometry failures).
Errors go to stderr; data goes to --output or stdout.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .camera import (
    CameraIntrinsics,
    Frame,
    Pose2D,
    Pose3D,
    Space,
    batch_project,
    batch_world_to_camera,
    load_camera_json,
)
from .dataset import (
    PAD_POLICIES,
    FramePair,
    PoseSequence,
    WindowSpec,
    canonicalize_dataset,
    load_sequences,
    serialize_sequences,
    window,
)
from .errors import DataError, GeometryError, ParseError, SchemaError
from .jsonfmt import dumps
from .lift import LiftingStudyConfig, run_study
from .metrics import mpjpe, p_mpjpe
from .skeleton import available_skeletons, get_skeleton
from .stats import (
    body_orientation_distribution,
    joint_scatter_extent,
    pelvis_position_distribution,
    write_samples_csv,
)
from .synth import DEFAULT_ROOT_REGION, Box3, SynthConfig, generate_pose_array


class _UsageError(Exception):
    """Flag/configuration problem; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; route them to our own
    # validation exit code instead.
    def error(self, message):
        raise _UsageError(message)


def _default_threads() -> int:
    return os.cpu_count() or 1


def _add_io(parser: argparse.ArgumentParser, input_help: str) -> None:
    parser.add_argument("--input", required=True, help=input_help)
    parser.add_argument("--output", help="output path (default: stdout)")


def _add_skeleton(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--skeleton",
        default="h36m17",
        help=f"skeleton name, one of {', '.join(available_skeletons())} (default: h36m17)",
    )


def _add_threads(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker pool size; output is identical for any value (default: logical cores)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="canonpose", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser(
        "canonicalize",
        help="rewrite a dataset into the canonical camera frame",
        description="Rewrite an NDJSON dataset into the canonical camera frame. The 3d mode "
        "canonicalizes 3D joints and projects canonical 2D from them; the 2d mode maps the "
        "2D joints alone through the plane-induced rotation and leaves any 3D untouched. "
        "When the camera file carries extrinsics (R, t), 3D input is taken as world-frame "
        "and moved into the camera frame first.",
    )
    _add_io(p, "input NDJSON dataset")
    p.add_argument("--camera", required=True, help="camera JSON with fx, fy, cx, cy, width, height (optional R, t)")
    p.add_argument("--mode", choices=("2d", "3d"), default="3d", help="which canonicalization path to run (default: 3d)")
    _add_skeleton(p)
    _add_threads(p)
    p.set_defaults(handler=_cmd_canonicalize)

    p = sub.add_parser(
        "stats",
        help="summarize pelvis position, body orientation, and joint scatter",
        description="Summarize input distributions: pelvis position (camera-space x-y and "
        "image space), body orientation (unit normals from hips and torso), and pooled "
        "joint scatter. Writes one JSON document; --csv additionally dumps raw samples.",
    )
    _add_io(p, "input NDJSON dataset")
    p.add_argument("--camera", help="camera JSON; used to project pelvis image positions when 2D joints are absent")
    _add_skeleton(p)
    p.add_argument("--csv", metavar="DIR", help="also write raw sample CSVs into this directory")
    p.set_defaults(handler=_cmd_stats)

    p = sub.add_parser(
        "eval",
        help="score predictions against ground truth (millimeters)",
        description="Score predicted 3D joints against ground truth, matched by "
        "(subject, action, camera) and frame order. Both sides are root-centered before "
        "scoring; the result is printed in millimeters (internal math is in meters).",
    )
    p.add_argument("--pred", required=True, help="predictions, NDJSON with joints_3d")
    p.add_argument("--gt", required=True, help="ground truth, NDJSON with joints_3d")
    p.add_argument("--metric", choices=("mpjpe", "pmpjpe"), default="mpjpe", help="error metric (default: mpjpe)")
    _add_skeleton(p)
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser(
        "synth",
        help="generate a synthetic NDJSON dataset",
        description="Generate random camera-space poses as one NDJSON sequence. With "
        "--camera, projected 2D joints are included. Identical seeds and configs give "
        "byte-identical output.",
    )
    p.add_argument("--output", help="output path (default: stdout)")
    p.add_argument("--seed", type=int, default=0, help="generator seed (default: 0)")
    p.add_argument("--count", type=int, default=100, help="number of poses (default: 100)")
    p.add_argument("--camera", help="camera JSON; adds projected joints_2d to each frame")
    _add_skeleton(p)
    p.add_argument(
        "--config",
        help="JSON file overriding generator fields: n_poses, limb_scale, root_region {low, high}",
    )
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser(
        "study",
        help="run the canonical-vs-conventional lifting comparison",
        description="Train identical linear lifters on conventional and canonical inputs "
        "over synthetic poses, evaluate on out-of-region roots, and report per-arm metrics "
        "(millimeters) plus their MPJPE ratio as JSON. Deterministic for a fixed config.",
    )
    p.add_argument("--output", help="output path (default: stdout)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed (default: config value)")
    p.add_argument(
        "--config",
        help="JSON file overriding study fields: train_root_region, test_root_region, "
        "noise_sigma, n_train, n_test, seed, ridge_lambda, camera, limb_scale, skeleton",
    )
    _add_threads(p)
    p.set_defaults(handler=_cmd_study)

    p = sub.add_parser(
        "window",
        help="slice sequences into fixed-length windows",
        description="Slice each sequence into windows of --window-length every "
        "--window-stride frames. Windows become separate sequences whose action names "
        "gain a #w<k> suffix so they stay distinct on reload. The repeat-last policy "
        "pads one final window with copies of the last frame when a tail would "
        "otherwise be dropped.",
    )
    _add_io(p, "input NDJSON dataset")
    p.add_argument("--window-length", type=int, required=True, help="frames per window")
    p.add_argument("--window-stride", type=int, required=True, help="frames between window starts")
    p.add_argument("--pad", choices=PAD_POLICIES, default="drop", help="tail policy (default: drop)")
    _add_skeleton(p)
    p.set_defaults(handler=_cmd_window)

    return parser


def _get_skeleton(name: str):
    try:
        return get_skeleton(name)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc


def _read_config_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            config = json.load(handle)
    except json.JSONDecodeError as exc:
        raise _UsageError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise _UsageError(f"{path}: config must be a JSON object")
    return config


def _write_text(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)


def _apply_extrinsics(sequences, extrinsics):
    """Move world-frame 3D joints into the camera frame, leaving 2D alone."""
    moved = []
    for seq in sequences:
        frames = []
        for pair in seq.frames:
            pose3d = pair.pose_3d
            if pose3d is not None:
                joints = batch_world_to_camera(
                    pose3d.joints[None], extrinsics.rotation, extrinsics.translation
                )[0]
                pose3d = dataclasses.replace(pose3d, joints=joints, frame=Frame.CAMERA)
            frames.append(dataclasses.replace(pair, pose_3d=pose3d))
        moved.append(dataclasses.replace(seq, frames=tuple(frames)))
    return moved


def _cmd_canonicalize(args) -> int:
    skeleton = _get_skeleton(args.skeleton)
    intrinsics, extrinsics = load_camera_json(args.camera)
    sequences = load_sequences(args.input, skeleton)
    if extrinsics is not None:
        sequences = _apply_extrinsics(sequences, extrinsics)
    mode = "3d-path" if args.mode == "3d" else "2d-path"
    result = canonicalize_dataset(sequences, intrinsics, mode, threads=args.threads)
    _write_text(serialize_sequences(result), args.output)
    return 0


def _cmd_stats(args) -> int:
    skeleton = _get_skeleton(args.skeleton)
    intrinsics = load_camera_json(args.camera)[0] if args.camera else None
    sequences = load_sequences(args.input, skeleton)
    xy, image = pelvis_position_distribution(sequences, intrinsics)
    orientation = body_orientation_distribution(sequences, skeleton)
    summaries = {
        "pelvis_xy_m": xy,
        "pelvis_image_px": image,
        "body_orientation": orientation,
        "joint_scatter_2d_px": joint_scatter_extent(sequences, "2d"),
        "joint_scatter_3d_root_relative_m": joint_scatter_extent(sequences, "3d-root-relative"),
    }
    _write_text(dumps({k: v.to_dict() for k, v in summaries.items()}, indent=2) + "\n", args.output)
    if args.csv:
        os.makedirs(args.csv, exist_ok=True)
        for name, summary in summaries.items():
            write_samples_csv(summary, os.path.join(args.csv, f"{name}.csv"))
    return 0


def _stacked_3d(sequences, label: str) -> dict[tuple, np.ndarray]:
    stacks = {}
    for seq in sequences:
        joints = seq.joints_3d()
        if joints is None:
            raise DataError(f"{label}: sequence {seq.key} has frames without 3D joints")
        stacks[seq.key] = joints
    return stacks


def _cmd_eval(args) -> int:
    skeleton = _get_skeleton(args.skeleton)
    pred = _stacked_3d(load_sequences(args.pred, skeleton), "--pred")
    gt = _stacked_3d(load_sequences(args.gt, skeleton), "--gt")
    if not pred:
        raise DataError("--pred holds no sequences")
    missing = [key for key in pred if key not in gt]
    if missing:
        raise DataError(f"prediction sequences missing from ground truth: {sorted(missing)}")
    preds, gts = [], []
    for key, pred_joints in pred.items():
        gt_joints = gt[key]
        if pred_joints.shape != gt_joints.shape:
            raise DataError(f"sequence {key}: prediction shape {pred_joints.shape} != ground truth {gt_joints.shape}")
        preds.append(pred_joints)
        gts.append(gt_joints)
    pred_arr = np.concatenate(preds)
    gt_arr = np.concatenate(gts)
    # Scores are over root-relative poses; absolute placement is not the
    # lifter's job and is removed from both sides identically.
    root = skeleton.root_index
    pred_arr = pred_arr - pred_arr[:, root : root + 1]
    gt_arr = gt_arr - gt_arr[:, root : root + 1]
    metric = mpjpe if args.metric == "mpjpe" else p_mpjpe
    print(f"{args.metric} {metric(pred_arr, gt_arr) * 1000.0:.6f} mm")
    return 0


def _box_from_config(value, where: str) -> Box3:
    if not isinstance(value, dict) or set(value) != {"low", "high"}:
        raise _UsageError(f"{where} must be an object with keys low, high")
    try:
        return Box3(value["low"], value["high"])
    except (ValueError, TypeError) as exc:
        raise _UsageError(f"{where}: {exc}") from exc


def _cmd_synth(args) -> int:
    skeleton = _get_skeleton(args.skeleton)
    fields = {"seed": args.seed, "n_poses": args.count, "limb_scale": 1.0, "root_region": DEFAULT_ROOT_REGION}
    if args.config:
        config = _read_config_json(args.config)
        unknown = set(config) - {"n_poses", "limb_scale", "root_region"}
        if unknown:
            raise _UsageError(f"{args.config}: unknown generator fields {sorted(unknown)}")
        if "root_region" in config:
            config["root_region"] = _box_from_config(config["root_region"], "root_region")
        fields.update(config)
    try:
        synth_config = SynthConfig(**fields)
    except (ValueError, TypeError) as exc:
        raise _UsageError(str(exc)) from exc
    points = generate_pose_array(synth_config, skeleton)

    intrinsics = load_camera_json(args.camera)[0] if args.camera else None
    pixels = batch_project(points, intrinsics) if intrinsics is not None else None
    frames = tuple(
        FramePair(
            pose_2d=Pose2D(pixels[i], Space.IMAGE) if pixels is not None else None,
            pose_3d=Pose3D(points[i], Frame.CAMERA),
            index=i,
        )
        for i in range(points.shape[0])
    )
    sequence = PoseSequence(
        subject="synth",
        action=f"seed{synth_config.seed}",
        camera_id="cam0",
        fps=50.0,
        frames=frames,
        skeleton=skeleton,
    )
    _write_text(serialize_sequences([sequence]), args.output)
    return 0


_STUDY_CONFIG_FIELDS = {
    "train_root_region",
    "test_root_region",
    "noise_sigma",
    "n_train",
    "n_test",
    "seed",
    "ridge_lambda",
    "camera",
    "limb_scale",
    "skeleton",
}


def _cmd_study(args) -> int:
    fields: dict = {}
    if args.config:
        config = _read_config_json(args.config)
        unknown = set(config) - _STUDY_CONFIG_FIELDS
        if unknown:
            raise _UsageError(f"{args.config}: unknown study fields {sorted(unknown)}")
        for key in ("train_root_region", "test_root_region"):
            if key in config:
                config[key] = _box_from_config(config[key], key)
        if "camera" in config:
            camera = config.pop("camera")
            if not isinstance(camera, dict):
                raise _UsageError("camera must be an object with fx, fy, cx, cy, width, height")
            try:
                config["camera"] = CameraIntrinsics(**camera)
            except (ValueError, TypeError) as exc:
                raise _UsageError(f"camera: {exc}") from exc
        if "skeleton" in config:
            config["skeleton_name"] = config.pop("skeleton")
        fields.update(config)
    if args.seed is not None:
        fields["seed"] = args.seed
    try:
        study_config = LiftingStudyConfig(**fields)
    except (ValueError, TypeError) as exc:
        raise _UsageError(str(exc)) from exc
    report = run_study(study_config)
    _write_text(report.to_json(), args.output)
    return 0


def _cmd_window(args) -> int:
    skeleton = _get_skeleton(args.skeleton)
    try:
        spec = WindowSpec(length=args.window_length, stride=args.window_stride)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    sequences = load_sequences(args.input, skeleton)
    out = []
    for seq in sequences:
        for k, win in enumerate(window(seq, spec, args.pad)):
            out.append(dataclasses.replace(win, action=f"{win.action}#w{k:04d}"))
    _write_text(serialize_sequences(out), args.output)
    return 0


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, SchemaError, DataError, GeometryError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
