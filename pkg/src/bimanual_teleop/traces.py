"""Teleoperation input frames and trace files.

A ``TeleopFrame`` is one timestamped sample from an input device (VR
controller or leader arm).  Construction only enforces structure (side,
shapes, types): value-level faults such as NaN poses are deliberately
representable so the runtime pipeline can absorb them, which the safety
fuzz relies on.

Trace files are newline-delimited JSON records, one frame per line, with
canonical encoding (sorted keys, compact separators, shortest float
repr)::

    {"buttons":0,"gripper":0.0,"pos":[x,y,z],"quat":[w,x,y,z],"side":"left","t":0.004}

``joints`` (leader arm radians) appears only when present.  File-level
validation is strict - unknown keys, non-finite values, non-unit
quaternions (beyond 1e-9), per-side non-increasing or globally
decreasing timestamps, and gripper values outside [0, 1] are all
rejected with the offending line number.  For files produced by
``write_trace`` the canonical encoding makes read -> write the identity
on bytes.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, TraceFormatError
from .geometry import Pose, quat_to_rotation, rotation_to_quat

SIDES = ("left", "right")

_REQUIRED_KEYS = {"t", "side", "pos", "quat", "gripper", "buttons"}
_ALL_KEYS = _REQUIRED_KEYS | {"joints"}


def canonical_json_line(obj) -> str:
    """One canonical JSON record: sorted keys, compact, finite floats only."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


@dataclass(frozen=True)
class TeleopFrame:
    timestamp: float
    side: str
    position: np.ndarray  # meters
    quat_wxyz: np.ndarray  # unit rotation quaternion (w, x, y, z)
    leader_joints: np.ndarray | None = None  # radians, leader-follower mode only
    gripper: float = 0.0  # [0, 1] closed fraction
    buttons: int = 0  # bitfield

    def __post_init__(self):
        if self.side not in SIDES:
            raise DimensionMismatch(f"side must be one of {SIDES}, got {self.side!r}")
        pos = np.array(self.position, dtype=np.float64)
        quat = np.array(self.quat_wxyz, dtype=np.float64)
        if pos.shape != (3,):
            raise DimensionMismatch(f"position must be a 3-vector, got {pos.shape}")
        if quat.shape != (4,):
            raise DimensionMismatch(f"quaternion must be a 4-vector, got {quat.shape}")
        pos.flags.writeable = False
        quat.flags.writeable = False
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "quat_wxyz", quat)
        object.__setattr__(self, "timestamp", float(self.timestamp))
        object.__setattr__(self, "gripper", float(self.gripper))
        object.__setattr__(self, "buttons", int(self.buttons))
        if self.leader_joints is not None:
            j = np.array(self.leader_joints, dtype=np.float64)
            if j.ndim != 1 or j.size == 0:
                raise DimensionMismatch(f"leader joints must be a non-empty vector, got {j.shape}")
            j.flags.writeable = False
            object.__setattr__(self, "leader_joints", j)

    @staticmethod
    def from_pose(timestamp: float, side: str, pose: Pose, **kw) -> "TeleopFrame":
        return TeleopFrame(
            timestamp=timestamp,
            side=side,
            position=pose.translation,
            quat_wxyz=rotation_to_quat(pose.rotation),
            **kw,
        )

    @cached_property
    def control_pose(self) -> Pose:
        """Pose of the control frame; raises on non-finite values."""
        return Pose(quat_to_rotation(self.quat_wxyz), self.position)

    def is_finite(self) -> bool:
        ok = (
            math.isfinite(self.timestamp)
            and bool(np.all(np.isfinite(self.position)))
            and bool(np.all(np.isfinite(self.quat_wxyz)))
            and math.isfinite(self.gripper)
        )
        if ok and self.leader_joints is not None:
            ok = bool(np.all(np.isfinite(self.leader_joints)))
        return ok


def frame_to_record(frame: TeleopFrame) -> dict:
    record = {
        "t": frame.timestamp,
        "side": frame.side,
        "pos": [float(v) for v in frame.position],
        "quat": [float(v) for v in frame.quat_wxyz],
        "gripper": frame.gripper,
        "buttons": frame.buttons,
    }
    if frame.leader_joints is not None:
        record["joints"] = [float(v) for v in frame.leader_joints]
    return record


def record_to_frame(record: dict, line_no: int | None = None) -> TeleopFrame:
    if not isinstance(record, dict):
        raise TraceFormatError("record is not an object", line_no)
    keys = set(record)
    missing = _REQUIRED_KEYS - keys
    if missing:
        raise TraceFormatError(f"missing keys {sorted(missing)}", line_no)
    unknown = keys - _ALL_KEYS
    if unknown:
        raise TraceFormatError(f"unknown keys {sorted(unknown)}", line_no)
    try:
        return TeleopFrame(
            timestamp=record["t"],
            side=record["side"],
            position=np.asarray(record["pos"], dtype=np.float64),
            quat_wxyz=np.asarray(record["quat"], dtype=np.float64),
            leader_joints=(
                np.asarray(record["joints"], dtype=np.float64) if "joints" in record else None
            ),
            gripper=record["gripper"],
            buttons=record["buttons"],
        )
    except (DimensionMismatch, TypeError, ValueError) as exc:
        raise TraceFormatError(str(exc), line_no) from None


def _validate_strict(frame: TeleopFrame, line_no: int | None) -> None:
    if not frame.is_finite():
        raise TraceFormatError("frame contains non-finite values", line_no)
    norm = float(np.linalg.norm(frame.quat_wxyz))
    if abs(norm - 1.0) > 1e-9:
        raise TraceFormatError(f"quaternion norm {norm!r} is not 1 within 1e-9", line_no)
    if not 0.0 <= frame.gripper <= 1.0:
        raise TraceFormatError(f"gripper {frame.gripper!r} outside [0, 1]", line_no)
    if frame.buttons < 0:
        raise TraceFormatError("buttons bitfield must be non-negative", line_no)


class _MonotoneGuard:
    """Timestamps: strictly increasing per side, non-decreasing overall."""

    def __init__(self):
        self.last_global: float | None = None
        self.last_side: dict[str, float] = {}

    def feed(self, frame: TeleopFrame, line_no: int | None) -> None:
        t = frame.timestamp
        if self.last_global is not None and t < self.last_global:
            raise TraceFormatError(f"timestamp {t!r} decreases", line_no)
        prev = self.last_side.get(frame.side)
        if prev is not None and t <= prev:
            raise TraceFormatError(
                f"timestamp {t!r} does not increase for side {frame.side!r}", line_no
            )
        self.last_global = t
        self.last_side[frame.side] = t


def trace_to_text(frames) -> str:
    guard = _MonotoneGuard()
    lines = []
    for i, frame in enumerate(frames, start=1):
        _validate_strict(frame, i)
        guard.feed(frame, i)
        lines.append(canonical_json_line(frame_to_record(frame)))
    return "".join(lines)


def parse_trace(text: str, source: str = "<string>") -> list[TeleopFrame]:
    frames = []
    guard = _MonotoneGuard()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"{source}: bad JSON ({exc.msg})", line_no) from None
        frame = record_to_frame(record, line_no)
        _validate_strict(frame, line_no)
        guard.feed(frame, line_no)
        frames.append(frame)
    # An empty trace is legal: replaying it yields an empty log.
    return frames


def read_trace(path) -> list[TeleopFrame]:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_trace(text, source=os.path.basename(str(path)))


def write_trace(frames, path) -> None:
    text = trace_to_text(frames)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
