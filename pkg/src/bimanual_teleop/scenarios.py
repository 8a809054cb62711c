"""Synthetic teleoperation traces for tests and demos.

Every scenario emits left/right frame pairs sharing one timestamp per
control period, starting from the identity controller pose, so a fresh
session auto-calibrates on the first frame and the remaining motion is
pure controller delta:

* ``line``: straight translation of ``displacement`` meters along +x
  over ``ticks`` periods, then ``hold`` stationary periods.
* ``arc``: quarter circle of radius ``displacement`` in the xy plane
  with a matched yaw sweep, then hold.
* ``step``: stationary, one small instantaneous +x step at mid-trace,
  then hold; exercises the smoothing filter's step response.
* ``spike``: the line scenario with a single 1 m outlier frame at
  mid-trace; exercises filter rejection and the watchdog.
* ``fuzz``: seeded random wander with occasional large-but-finite
  jumps. File-valid by construction (unit quaternions, monotone
  stamps); the jumps are for the safety layer, not the parser.
"""

from __future__ import annotations

import numpy as np

from .geometry import rotation_exp, rotation_to_quat
from .traces import SIDES, TeleopFrame

SCENARIOS = ("line", "arc", "step", "spike", "fuzz")

IDENTITY_QUAT = (1.0, 0.0, 0.0, 0.0)


def _pair(t, pos, quat=IDENTITY_QUAT, gripper=0.0):
    return [
        TeleopFrame(
            timestamp=t,
            side=side,
            position=np.asarray(pos, dtype=float),
            quat_wxyz=np.asarray(quat, dtype=float),
            gripper=gripper,
        )
        for side in SIDES
    ]


def _line(dt, ticks, hold, displacement):
    frames = []
    target = np.array([displacement, 0.0, 0.0])
    for i in range(1, ticks + hold + 1):
        s = min(i / ticks, 1.0)
        frames.extend(_pair(i * dt, target * s))
    return frames


def _arc(dt, ticks, hold, displacement):
    frames = []
    r = displacement
    for i in range(1, ticks + hold + 1):
        s = min(i / ticks, 1.0)
        phi = s * np.pi / 2
        pos = np.array([r * np.sin(phi), r * (1.0 - np.cos(phi)), 0.0])
        quat = rotation_to_quat(rotation_exp(np.array([0.0, 0.0, phi / 3])))
        frames.extend(_pair(i * dt, pos, quat, gripper=s))
    return frames


def _step(dt, ticks, hold, displacement):
    frames = []
    # 5 mm default step: passes the 2 m/s gate at 250 Hz (8 mm ceiling).
    size = min(displacement, 0.005)
    for i in range(1, ticks + hold + 1):
        pos = (0.0, 0.0, 0.0) if i <= ticks // 2 else (size, 0.0, 0.0)
        frames.extend(_pair(i * dt, pos))
    return frames


def _spike(dt, ticks, hold, displacement):
    frames = _line(dt, ticks, hold, displacement)
    mid = len(frames) // 2
    outlier = frames[mid]
    frames[mid] = TeleopFrame(
        timestamp=outlier.timestamp,
        side=outlier.side,
        position=outlier.position + np.array([1.0, 0.0, 0.0]),
        quat_wxyz=outlier.quat_wxyz,
        gripper=outlier.gripper,
        buttons=outlier.buttons,
    )
    return frames


def _fuzz(dt, ticks, hold, displacement, seed):
    rng = np.random.default_rng(seed)
    frames = []
    pos = {side: np.zeros(3) for side in SIDES}
    for i in range(1, ticks + hold + 1):
        t = i * dt
        for side in SIDES:
            roll = rng.uniform()
            if roll < 0.85:
                pos[side] = pos[side] + rng.uniform(-0.003, 0.003, 3)
                p = pos[side]
            else:
                p = pos[side] + rng.uniform(-2.0, 2.0, 3)  # outlier, still finite
            axis = rng.standard_normal(3)
            axis /= np.linalg.norm(axis)
            quat = rotation_to_quat(rotation_exp(axis * rng.uniform(0.0, 0.01)))
            frames.append(
                TeleopFrame(
                    timestamp=t,
                    side=side,
                    position=p.copy(),
                    quat_wxyz=quat,
                    gripper=float(rng.uniform(0.0, 1.0)),
                )
            )
    return frames


def generate(
    scenario: str,
    dt: float = 0.004,
    ticks: int = 250,
    hold: int = 250,
    displacement: float = 0.1,
    seed: int = 0,
) -> list[TeleopFrame]:
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    if dt <= 0 or ticks < 1 or hold < 0:
        raise ValueError("dt must be positive, ticks >= 1, hold >= 0")
    if scenario == "line":
        return _line(dt, ticks, hold, displacement)
    if scenario == "arc":
        return _arc(dt, ticks, hold, displacement)
    if scenario == "step":
        return _step(dt, ticks, hold, displacement)
    if scenario == "spike":
        return _spike(dt, ticks, hold, displacement)
    return _fuzz(dt, ticks, hold, displacement, seed)
