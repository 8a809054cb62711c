"""Device-agnostic input conditioning and relative motion retargeting.

Per side, raw frames pass through a causal filter first (smoothing and
spike rejection), and calibration anchors are captured from the filtered
stream, so a spike arriving during calibration cannot poison the anchor.

Retargeting maps relative controller motion onto the robot.  With the
anchor pair (controller_origin C0, robot_origin R0) and a live filtered
control pose C:

    delta   = C0^-1 C
    desired = delta * R0        frame_mode = "world" (default)
    desired = R0 * delta        frame_mode = "tool"

An identity anchor pair therefore reproduces the controller pose
verbatim, and re-anchoring with the current pair keeps the desired-pose
stream continuous through clutch releases.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import AlreadyCalibrated, DimensionMismatch, NotCalibrated
from .geometry import Pose, compose, inverse, rotation_distance, rotation_slerp
from .traces import TeleopFrame

RETARGET_FRAMES = ("world", "tool")


@dataclass(frozen=True)
class FilterParams:
    alpha: float = 0.3  # EMA weight of the newest sample
    max_linear_velocity: float = 2.0  # m/s
    max_angular_velocity: float = 6.0  # rad/s

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.max_linear_velocity <= 0 or self.max_angular_velocity <= 0:
            raise ValueError("velocity bounds must be positive")


@dataclass(frozen=True)
class FilteredSample:
    timestamp: float
    position: np.ndarray
    rotation: np.ndarray
    gripper: float
    leader_joints: np.ndarray | None
    buttons: int

    def pose(self) -> Pose:
        return Pose(self.rotation, self.position)


@dataclass(frozen=True)
class FilterResult:
    sample: FilteredSample
    accepted: bool
    reason: str | None = None  # "non_finite" | "velocity" | "timestamp" when rejected


class InputFilter:
    """Causal per-side smoother: EMA on translation, geodesic blend on
    rotation, with velocity gating relative to the last emitted sample.

    A rejected frame holds the previous output (advancing its timestamp
    unless the timestamp itself was the fault), so the emitted stream
    never violates the velocity bounds.  ``reset`` forgets the state;
    the session calls it on clutch release, when the controller may
    legitimately have teleported.
    """

    def __init__(self, params: FilterParams):
        self.params = params
        self._last: FilteredSample | None = None

    def reset(self) -> None:
        self._last = None

    def process(self, frame: TeleopFrame) -> FilterResult:
        last = self._last

        if not np.isfinite(frame.timestamp) or (
            last is not None and frame.timestamp <= last.timestamp
        ):
            if last is None:
                # Nothing sane to hold yet; emit a rejected placeholder.
                held = FilteredSample(0.0, np.zeros(3), np.eye(3), 0.0, None, 0)
            else:
                held = last
            return FilterResult(sample=held, accepted=False, reason="timestamp")

        if not frame.is_finite():
            return FilterResult(sample=self._hold(frame.timestamp), accepted=False, reason="non_finite")
        norm = float(np.linalg.norm(frame.quat_wxyz))
        if abs(norm - 1.0) > 1e-3:
            return FilterResult(sample=self._hold(frame.timestamp), accepted=False, reason="non_finite")

        gripper = float(min(max(frame.gripper, 0.0), 1.0))
        rotation = frame.control_pose.rotation

        if last is None:
            sample = FilteredSample(
                timestamp=frame.timestamp,
                position=frame.position.copy(),
                rotation=rotation,
                gripper=gripper,
                leader_joints=frame.leader_joints,
                buttons=frame.buttons,
            )
            self._last = sample
            return FilterResult(sample=sample, accepted=True)

        dt = frame.timestamp - last.timestamp
        jump = float(np.linalg.norm(frame.position - last.position))
        angle = rotation_distance(last.rotation, rotation)
        if jump > self.params.max_linear_velocity * dt or angle > self.params.max_angular_velocity * dt:
            self._last = replace(last, timestamp=frame.timestamp)
            return FilterResult(sample=self._last, accepted=False, reason="velocity")

        a = self.params.alpha
        sample = FilteredSample(
            timestamp=frame.timestamp,
            position=(1.0 - a) * last.position + a * frame.position,
            rotation=rotation_slerp(last.rotation, rotation, a),
            gripper=gripper,
            leader_joints=frame.leader_joints,
            buttons=frame.buttons,
        )
        self._last = sample
        return FilterResult(sample=sample, accepted=True)

    def _hold(self, timestamp: float) -> FilteredSample:
        if self._last is None:
            return FilteredSample(timestamp, np.zeros(3), np.eye(3), 0.0, None, 0)
        self._last = replace(self._last, timestamp=timestamp)
        return self._last


# ------------------------------------------------------------- retargeting


@dataclass(frozen=True)
class RetargetState:
    controller_origin: Pose
    robot_origin: Pose
    frame_mode: str = "world"

    def __post_init__(self):
        if self.frame_mode not in RETARGET_FRAMES:
            raise ValueError(f"frame_mode must be one of {RETARGET_FRAMES}")


def calibrate(
    control_pose: Pose,
    robot_pose: Pose,
    existing: RetargetState | None = None,
    frame_mode: str = "world",
) -> RetargetState:
    """Capture the anchor pair.  Re-anchoring requires an explicit call
    to ``re_anchor``; calibrating twice is a caller bug."""
    if existing is not None:
        raise AlreadyCalibrated("already calibrated; use re_anchor to move the anchors")
    return RetargetState(
        controller_origin=control_pose, robot_origin=robot_pose, frame_mode=frame_mode
    )


def re_anchor(state: RetargetState, control_pose: Pose, robot_pose: Pose) -> RetargetState:
    """Move both anchors (clutch release); the next retarget output
    equals robot_pose exactly, so the desired-pose stream is continuous."""
    if state is None:
        raise NotCalibrated("cannot re-anchor before the first calibration")
    return RetargetState(
        controller_origin=control_pose, robot_origin=robot_pose, frame_mode=state.frame_mode
    )


def retarget(state: RetargetState, control_pose: Pose) -> Pose:
    """Desired end-effector pose for the current control pose."""
    if state is None:
        raise NotCalibrated("retarget requires a calibration anchor")
    delta = compose(inverse(state.controller_origin), control_pose)
    if state.frame_mode == "world":
        return compose(delta, state.robot_origin)
    return compose(state.robot_origin, delta)


def leader_joint_delta(frame: TeleopFrame, anchor_joints, mode: str) -> np.ndarray:
    """Leader-arm joint delta against the previous step's anchor.

    Identically zero in VR mode, where no leader joints exist.
    """
    anchor = np.asarray(anchor_joints, dtype=np.float64)
    if mode == "vr":
        return np.zeros_like(anchor)
    if mode != "leader_follower":
        raise ValueError(f"unknown mode {mode!r}")
    if frame.leader_joints is None:
        raise DimensionMismatch("leader-follower frame lacks leader joints")
    if frame.leader_joints.shape != anchor.shape:
        raise DimensionMismatch(
            f"leader joints shape {frame.leader_joints.shape} != anchor {anchor.shape}"
        )
    return frame.leader_joints - anchor
