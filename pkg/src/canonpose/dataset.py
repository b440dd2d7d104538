"""Pose-sequence ingestion, serialization, windowing, and batch
canonicalization.

File format (NDJSON, one JSON object per line):

    {"subject": str, "action": str, "camera": str, "frame": int,
     "joints_2d": [[u, v], ...] | null, "joints_3d": [[x, y, z], ...] | null}

An optional header may appear as the first line:

    {"meta": {"skeleton": str, "unit_scale": number, "fps": number}}

``unit_scale`` multiplies 3D coordinates on load (declare 0.001 for
millimeter sources; this package works in meters). Canonicalized files carry
an extra ``canon`` key per record holding the rotation, its source vector,
and the root depth, so predictions can be back-transformed later.

Floats are written with 17 significant digits, so a load/save round trip is
bit-exact and re-saving a loaded file reproduces it byte for byte. Records
are grouped into sequences by (subject, action, camera) in first-appearance
order, frames in file order.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .camera import CameraIntrinsics, EPS_DEPTH, Frame, Pose2D, Pose3D, Space
from .canonical import (
    EPS_ANTIPARALLEL,
    EPS_VEC,
    CanonicalRecord,
    CanonicalRotation,
    batch_canonicalize_2d,
    batch_canonicalize_3d,
    batch_project_centered,
)
from .errors import ParseError, SchemaError, SequenceCanonicalizationError
from .jsonfmt import format_float
from .skeleton import Skeleton

DEFAULT_FPS = 50.0


@dataclass(frozen=True, eq=False)
class FramePair:
    """One frame's observations: 2D, 3D, or both, plus its source frame number."""

    pose_2d: Pose2D | None
    pose_3d: Pose3D | None
    index: int

    def __post_init__(self):
        if self.pose_2d is None and self.pose_3d is None:
            raise ValueError("a frame needs at least one of a 2D or a 3D pose")
        if (
            self.pose_2d is not None
            and self.pose_3d is not None
            and self.pose_2d.n_joints != self.pose_3d.n_joints
        ):
            raise ValueError(
                f"2D and 3D joint counts differ ({self.pose_2d.n_joints} vs {self.pose_3d.n_joints})"
            )
        object.__setattr__(self, "index", int(self.index))

    @property
    def n_joints(self) -> int:
        pose = self.pose_2d if self.pose_2d is not None else self.pose_3d
        return pose.n_joints


@dataclass(frozen=True, eq=False)
class PoseSequence:
    """Consecutive frames sharing a subject, action, camera, and skeleton.

    ``records`` is populated by canonicalization and holds one
    CanonicalRecord per frame.
    """

    subject: str
    action: str
    camera_id: str
    fps: float
    frames: tuple[FramePair, ...]
    skeleton: Skeleton
    records: tuple[CanonicalRecord, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.frames:
            raise ValueError("a sequence needs at least one frame")
        fps = float(self.fps)
        if not np.isfinite(fps) or fps <= 0:
            raise ValueError(f"fps must be positive and finite, got {fps!r}")
        object.__setattr__(self, "fps", fps)
        expected = self.skeleton.n_joints
        for position, frame in enumerate(self.frames):
            if frame.n_joints != expected:
                raise ValueError(
                    f"frame {position} has {frame.n_joints} joints, skeleton "
                    f"{self.skeleton.name!r} has {expected}"
                )
        if self.records is not None:
            object.__setattr__(self, "records", tuple(self.records))
            if len(self.records) != len(self.frames):
                raise ValueError("records and frames must have equal length")

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.subject, self.action, self.camera_id)

    def joints_2d(self) -> np.ndarray | None:
        """(T, J, 2) array, or None when any frame lacks a 2D pose."""
        if any(frame.pose_2d is None for frame in self.frames):
            return None
        return np.stack([frame.pose_2d.joints for frame in self.frames])

    def joints_3d(self) -> np.ndarray | None:
        """(T, J, 3) array, or None when any frame lacks a 3D pose."""
        if any(frame.pose_3d is None for frame in self.frames):
            return None
        return np.stack([frame.pose_3d.joints for frame in self.frames])


@dataclass(frozen=True)
class WindowSpec:
    """Fixed window length and stride, both in frames."""

    length: int
    stride: int

    def __post_init__(self):
        object.__setattr__(self, "length", int(self.length))
        object.__setattr__(self, "stride", int(self.stride))
        if self.length < 1 or self.stride < 1:
            raise ValueError(f"window length and stride must be >= 1, got {self.length}, {self.stride}")


PAD_POLICIES = ("drop", "repeat-last")


def window(seq: PoseSequence, spec: WindowSpec, pad_policy: str = "drop") -> list[PoseSequence]:
    """Cut a sequence into fixed-length windows.

    Full windows start at offsets 0, stride, 2*stride, ... and must fit
    entirely inside the sequence. Under ``repeat-last``, if the full windows
    do not already cover the final frame, one more window is taken at the
    next offset and padded to length by repeating the last frame; under
    ``drop`` the remainder is discarded.
    """
    if pad_policy not in PAD_POLICIES:
        raise ValueError(f"pad_policy must be one of {PAD_POLICIES}, got {pad_policy!r}")
    n = seq.n_frames
    length, stride = spec.length, spec.stride
    offsets = list(range(0, n - length + 1, stride)) if n >= length else []
    slices = [(off, seq.frames[off : off + length], False) for off in offsets]
    if pad_policy == "repeat-last":
        covered = offsets[-1] + length if offsets else 0
        next_offset = len(offsets) * stride
        if covered < n and next_offset < n:
            tail = seq.frames[next_offset:]
            padded = tail + (tail[-1],) * (length - len(tail))
            slices.append((next_offset, padded, True))
    out = []
    for off, frames, is_padded in slices:
        records = None
        if seq.records is not None:
            records = seq.records[off : off + length]
            if is_padded:
                records = records + (records[-1],) * (length - len(records))
        out.append(replace(seq, frames=frames, records=records))
    return out


# ---------------------------------------------------------------------------
# NDJSON serialization.
# ---------------------------------------------------------------------------


def _format_joints(array: np.ndarray | None) -> str:
    if array is None:
        return "null"
    rows = ", ".join(
        "[" + ", ".join(format_float(value) for value in row) + "]" for row in array
    )
    return "[" + rows + "]"


def _record_line(seq: PoseSequence, frame: FramePair, record: CanonicalRecord | None) -> str:
    parts = [
        f'"subject": {json.dumps(seq.subject)}',
        f'"action": {json.dumps(seq.action)}',
        f'"camera": {json.dumps(seq.camera_id)}',
        f'"frame": {frame.index}',
        f'"joints_2d": {_format_joints(frame.pose_2d.joints if frame.pose_2d else None)}',
        f'"joints_3d": {_format_joints(frame.pose_3d.joints if frame.pose_3d else None)}',
    ]
    if record is not None:
        rotation = ", ".join(format_float(v) for v in record.rotation.matrix.ravel())
        source = ", ".join(format_float(v) for v in record.rotation.source_vector)
        depth = "null" if record.root_depth is None else format_float(record.root_depth)
        parts.append(
            f'"canon": {{"rotation": [{rotation}], "source": [{source}], "root_depth": {depth}}}'
        )
    return "{" + ", ".join(parts) + "}"


def serialize_sequences(sequences) -> str:
    """Render sequences as NDJSON text (deterministic, 17-digit floats)."""
    sequences = list(sequences)
    lines = []
    if sequences:
        fps_values = {seq.fps for seq in sequences}
        names = {seq.skeleton.name for seq in sequences}
        if len(fps_values) == 1 and len(names) == 1:
            lines.append(
                '{"meta": {"skeleton": %s, "unit_scale": 1, "fps": %s}}'
                % (json.dumps(next(iter(names))), format_float(next(iter(fps_values))))
            )
    for seq in sequences:
        records = seq.records if seq.records is not None else (None,) * seq.n_frames
        for frame, record in zip(seq.frames, records):
            lines.append(_record_line(seq, frame, record))
    return "\n".join(lines) + "\n" if lines else ""


def save_sequences(sequences, path) -> None:
    """Write sequences to an NDJSON file; see the module docstring for the
    schema. Saving and re-loading is lossless, and re-saving what was loaded
    reproduces the file byte for byte."""
    text = serialize_sequences(sequences)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _parse_joints(value, width: int, expected: int, lineno: int, key: str) -> np.ndarray | None:
    if value is None:
        return None
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"line {lineno}: {key} is not numeric: {exc}", lineno) from exc
    if arr.ndim != 2 or arr.shape[1] != width:
        raise SchemaError(f"line {lineno}: {key} must be a list of {width}-vectors, got shape {arr.shape}", lineno)
    if arr.shape[0] != expected:
        raise SchemaError(
            f"line {lineno}: {key} has {arr.shape[0]} joints, expected {expected}", lineno
        )
    if not np.isfinite(arr).all():
        raise SchemaError(f"line {lineno}: {key} contains non-finite values", lineno)
    return arr


def _parse_canon(value, lineno: int, unit_scale: float):
    if value is None:
        return None
    if not isinstance(value, dict):
        raise SchemaError(f"line {lineno}: canon must be an object", lineno)
    try:
        matrix = np.asarray(value["rotation"], dtype=np.float64).reshape(3, 3)
        source = np.asarray(value["source"], dtype=np.float64).reshape(3)
        depth = value.get("root_depth")
        rotation = CanonicalRotation(matrix, source)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"line {lineno}: invalid canon block: {exc}", lineno) from exc
    if depth is not None:
        depth = float(depth) * unit_scale
    return rotation, depth


def _read_meta(obj: dict, lineno: int, skeleton: Skeleton) -> tuple[float, float]:
    meta = obj["meta"]
    if not isinstance(meta, dict):
        raise SchemaError(f"line {lineno}: meta must be an object", lineno)
    name = meta.get("skeleton", skeleton.name)
    if name != skeleton.name:
        raise SchemaError(
            f"line {lineno}: file declares skeleton {name!r}, expected {skeleton.name!r}", lineno
        )
    try:
        unit_scale = float(meta.get("unit_scale", 1.0))
        fps = float(meta.get("fps", DEFAULT_FPS))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"line {lineno}: invalid meta numbers: {exc}", lineno) from exc
    if unit_scale <= 0 or not np.isfinite(unit_scale):
        raise SchemaError(f"line {lineno}: unit_scale must be positive", lineno)
    if fps <= 0 or not np.isfinite(fps):
        raise SchemaError(f"line {lineno}: fps must be positive", lineno)
    return unit_scale, fps


def load_sequences(path, skeleton: Skeleton) -> list[PoseSequence]:
    """Read an NDJSON pose file into sequences.

    Args:
        path: file to read.
        skeleton: expected joint layout; a header naming a different skeleton
            is rejected, and every record must carry ``skeleton.n_joints``
            joints.

    Returns:
        Sequences grouped by (subject, action, camera) in first-appearance
        order, frames in file order. 3D joints are multiplied by the header's
        ``unit_scale``.
    """
    unit_scale, fps = 1.0, DEFAULT_FPS
    groups: dict[tuple[str, str, str], list] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: invalid JSON: {exc.msg}", lineno) from exc
            if not isinstance(obj, dict):
                raise SchemaError(f"line {lineno}: record must be a JSON object", lineno)
            if "meta" in obj:
                if groups:
                    raise SchemaError(f"line {lineno}: header must precede all records", lineno)
                unit_scale, fps = _read_meta(obj, lineno, skeleton)
                continue
            for key in ("subject", "action", "camera"):
                if not isinstance(obj.get(key), str):
                    raise SchemaError(f"line {lineno}: missing or non-string {key!r}", lineno)
            if not isinstance(obj.get("frame"), int) or isinstance(obj.get("frame"), bool):
                raise SchemaError(f"line {lineno}: missing or non-integer 'frame'", lineno)
            expected = skeleton.n_joints
            joints_2d = _parse_joints(obj.get("joints_2d"), 2, expected, lineno, "joints_2d")
            joints_3d = _parse_joints(obj.get("joints_3d"), 3, expected, lineno, "joints_3d")
            if joints_2d is None and joints_3d is None:
                raise SchemaError(f"line {lineno}: record has neither joints_2d nor joints_3d", lineno)
            canon = _parse_canon(obj.get("canon"), lineno, unit_scale)
            if joints_3d is not None:
                joints_3d = joints_3d * unit_scale
            key = (obj["subject"], obj["action"], obj["camera"])
            groups.setdefault(key, []).append((lineno, obj["frame"], joints_2d, joints_3d, canon))

    sequences = []
    for (subject, action, camera_id), rows in groups.items():
        canon_count = sum(1 for row in rows if row[4] is not None)
        if canon_count not in (0, len(rows)):
            bad = next(lineno for lineno, _, _, _, canon in rows if canon is None)
            raise SchemaError(
                f"line {bad}: sequence ({subject}, {action}, {camera_id}) mixes "
                "canonicalized and raw frames",
                bad,
            )
        canonical = canon_count > 0
        frame_tag = Frame.CANONICAL_CAMERA if canonical else Frame.CAMERA
        frames, records = [], []
        for lineno, frame_no, joints_2d, joints_3d, canon in rows:
            pose_2d = Pose2D(joints_2d, Space.IMAGE) if joints_2d is not None else None
            pose_3d = Pose3D(joints_3d, frame_tag) if joints_3d is not None else None
            try:
                frames.append(FramePair(pose_2d, pose_3d, frame_no))
                if canonical:
                    rotation, depth = canon
                    if pose_2d is None:
                        raise SchemaError(
                            f"line {lineno}: canonicalized record lacks joints_2d", lineno
                        )
                    records.append(
                        CanonicalRecord(pose_3d, pose_2d, rotation, depth, skeleton.name)
                    )
            except SchemaError:
                raise
            except ValueError as exc:
                raise SchemaError(f"line {lineno}: {exc}", lineno) from exc
        sequences.append(
            PoseSequence(
                subject,
                action,
                camera_id,
                fps,
                tuple(frames),
                skeleton,
                tuple(records) if canonical else None,
            )
        )
    return sequences


# ---------------------------------------------------------------------------
# Batch canonicalization.
# ---------------------------------------------------------------------------

CANONICALIZE_MODES = ("3d-path", "2d-path")


def _sequence_array(seq: PoseSequence, channel: str) -> np.ndarray:
    getter = {"2d": lambda f: f.pose_2d, "3d": lambda f: f.pose_3d}[channel]
    missing = [i for i, frame in enumerate(seq.frames) if getter(frame) is None]
    if missing:
        raise SequenceCanonicalizationError(
            f"sequence {seq.key} lacks {channel.upper()} poses required by this path",
            frame_indices=missing,
        )
    return np.stack([getter(frame).joints for frame in seq.frames])


def _canonicalize_sequence_3d(seq: PoseSequence, intrinsics: CameraIntrinsics) -> PoseSequence:
    points = _sequence_array(seq, "3d")
    if any(f.pose_3d.frame is not Frame.CAMERA for f in seq.frames):
        raise SequenceCanonicalizationError(
            f"sequence {seq.key} is not in the camera frame (already canonical?)"
        )
    root = seq.skeleton.root_index
    roots = points[:, root]
    # Check every frame's root before rotating anything, so one failure
    # report covers the whole sequence.
    norms = np.linalg.norm(roots, axis=-1)
    unit_z = np.where(norms > 0, roots[:, 2] / np.where(norms > 0, norms, 1.0), 0.0)
    bad = (norms <= EPS_VEC) | (roots[:, 2] <= EPS_DEPTH) | (unit_z < -1.0 + EPS_ANTIPARALLEL)
    if bad.any():
        raise SequenceCanonicalizationError(
            f"sequence {seq.key} has frames whose root cannot be canonicalized",
            frame_indices=np.nonzero(bad)[0],
        )
    canonical, rotations, depths = batch_canonicalize_3d(points, root)
    behind = (canonical[..., 2] <= EPS_DEPTH).any(axis=1)
    if behind.any():
        raise SequenceCanonicalizationError(
            f"sequence {seq.key} has canonical joints at or behind the camera plane",
            frame_indices=np.nonzero(behind)[0],
        )
    pixels = batch_project_centered(canonical, intrinsics)

    frames, records = [], []
    for i, frame in enumerate(seq.frames):
        pose_3d = Pose3D(canonical[i], Frame.CANONICAL_CAMERA)
        pose_2d = Pose2D(pixels[i], Space.IMAGE)
        rotation = CanonicalRotation(rotations[i], roots[i])
        frames.append(FramePair(pose_2d, pose_3d, frame.index))
        records.append(
            CanonicalRecord(pose_3d, pose_2d, rotation, float(depths[i]), seq.skeleton.name)
        )
    return replace(seq, frames=tuple(frames), records=tuple(records))


def _canonicalize_sequence_2d(seq: PoseSequence, intrinsics: CameraIntrinsics) -> PoseSequence:
    pixels = _sequence_array(seq, "2d")
    root = seq.skeleton.root_index
    try:
        canonical, rotations, pelvis = batch_canonicalize_2d(pixels, intrinsics, root)
    except ValueError as exc:
        raise SequenceCanonicalizationError(
            f"sequence {seq.key}: {exc}",
            frame_indices=getattr(exc, "indices", None) or (),
        ) from exc

    frames, records = [], []
    for i, frame in enumerate(seq.frames):
        pose_2d = Pose2D(canonical[i], Space.IMAGE)
        rotation = CanonicalRotation(rotations[i], pelvis[i])
        depth = None
        if frame.pose_3d is not None:
            depth = float(np.linalg.norm(frame.pose_3d.joints[root]))
        # The stored 3D pose (if any) is left untouched: this path exists for
        # data whose 3D is absent or untrusted.
        frames.append(FramePair(pose_2d, frame.pose_3d, frame.index))
        records.append(CanonicalRecord(None, pose_2d, rotation, depth, seq.skeleton.name))
    return replace(seq, frames=tuple(frames), records=tuple(records))


def canonicalize_dataset(
    sequences, intrinsics: CameraIntrinsics, mode: str, threads: int | None = None
) -> list[PoseSequence]:
    """Canonicalize every sequence, frame by frame.

    Args:
        sequences: input PoseSequences.
        intrinsics: camera used to build canonical 2D poses.
        mode: "3d-path" (requires 3D poses; produces canonical 3D and 2D)
            or "2d-path" (requires 2D poses; produces canonical 2D and the
            rotation, leaving any stored 3D untouched).
        threads: worker threads (None means one per logical core). Output is
            identical for any thread count.

    Returns:
        New sequences, in input order, carrying one CanonicalRecord per
        frame.

    Raises:
        SequenceCanonicalizationError: some sequence has frames that cannot
            be canonicalized; the error lists every offending frame position
            and no partial sequence is emitted.
    """
    if mode not in CANONICALIZE_MODES:
        raise ValueError(f"mode must be one of {CANONICALIZE_MODES}, got {mode!r}")
    work = _canonicalize_sequence_3d if mode == "3d-path" else _canonicalize_sequence_2d
    sequences = list(sequences)
    workers = threads if threads is not None else (os.cpu_count() or 1)
    if workers <= 1 or len(sequences) <= 1:
        return [work(seq, intrinsics) for seq in sequences]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda seq: work(seq, intrinsics), sequences))
