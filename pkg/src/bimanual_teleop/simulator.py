"""Deterministic dual-arm kinematic simulator.

Pure fixed-timestep kinematics: a PD law turns the commanded joint
target into a joint velocity, the state integrates explicitly, and joint
positions are clamped to limits.  No dynamics, no contact, no wall-clock
reads, no randomness: identical command streams produce bit-identical
state trajectories.

The simulator also plays the role of the motor-current sensor.  It
synthesizes the currents a gravity-loaded arm would draw, plus the
contribution of an injected end-effector wrench:

    currents = diag(kt)^-1 (gravity_torques(q) + J^T w)

so the haptics pipeline upstream recovers exactly J^T w.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput
from .kinematics import (
    GRAVITY_DEFAULT,
    KinematicChain,
    clamp_to_limits,
    forward_kinematics,
    gravity_torques,
    joint_values,
    wrench_joint_torques,
)

SIDES = ("left", "right")


@dataclass(frozen=True)
class PDGains:
    kp: float = 20.0  # 1/s
    kd: float = 0.1  # dimensionless velocity damping
    max_velocity: float = 2.0  # rad/s, per joint

    def __post_init__(self):
        if self.kp <= 0 or self.kd < 0 or self.max_velocity <= 0:
            raise ValueError("PD gains must satisfy kp > 0, kd >= 0, max_velocity > 0")


def pd_velocity(q, qd, q_cmd, gains: PDGains) -> np.ndarray:
    """v = kp (q_cmd - q) - kd qd, clipped to the velocity cap."""
    v = gains.kp * (np.asarray(q_cmd) - np.asarray(q)) - gains.kd * np.asarray(qd)
    return np.clip(v, -gains.max_velocity, gains.max_velocity)


@dataclass
class ArmState:
    q: np.ndarray
    qd: np.ndarray
    commanded: np.ndarray
    wrench: np.ndarray = field(default_factory=lambda: np.zeros(6))  # (force; torque), base frame


class DualArmSimulator:
    def __init__(
        self,
        chains: dict[str, KinematicChain],
        gains: PDGains = PDGains(),
        torque_constants: dict[str, np.ndarray] | None = None,
        gravity=GRAVITY_DEFAULT,
    ):
        if set(chains) != set(SIDES):
            raise DimensionMismatch(f"chains must cover sides {SIDES}, got {sorted(chains)}")
        self.chains = chains
        self.gains = gains
        self.gravity = np.asarray(gravity, dtype=np.float64)
        self.tick = 0
        self.arms: dict[str, ArmState] = {}
        self.torque_constants: dict[str, np.ndarray] = {}
        for side in SIDES:
            chain = chains[side]
            self.arms[side] = ArmState(
                q=chain.home.copy(),
                qd=np.zeros(chain.dof),
                commanded=chain.home.copy(),
            )
            kt = np.ones(chain.dof) if torque_constants is None else torque_constants[side]
            kt = np.asarray(kt, dtype=np.float64)
            if kt.shape != (chain.dof,) or np.any(kt <= 0):
                raise DimensionMismatch(f"{side} torque constants must be positive per joint")
            self.torque_constants[side] = kt

    def step(self, commands: dict[str, np.ndarray], dt: float) -> None:
        """Advance exactly dt seconds with the given per-side joint targets."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        for side in SIDES:
            chain = self.chains[side]
            arm = self.arms[side]
            if side in commands and commands[side] is not None:
                cmd = joint_values(chain, commands[side])
                arm.commanded = cmd.copy()
            v = pd_velocity(arm.q, arm.qd, arm.commanded, self.gains)
            arm.q, _ = clamp_to_limits(chain, arm.q + v * dt)
            arm.qd = v
        self.tick += 1

    def inject_wrench(self, side: str, wrench) -> None:
        """Set the persistent (force; torque) tip wrench for one arm."""
        w = np.asarray(wrench, dtype=np.float64)
        if w.shape != (6,):
            raise DimensionMismatch(f"wrench must be a 6-vector, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise NonFiniteInput("wrench contains non-finite values")
        self.arms[side].wrench = w.copy()

    def synthesize_currents(self, side: str) -> np.ndarray:
        """Motor currents consistent with gravity plus the injected wrench."""
        chain = self.chains[side]
        arm = self.arms[side]
        tau = gravity_torques(chain, arm.q, self.gravity)
        tau = tau + wrench_joint_torques(chain, arm.q, arm.wrench)
        return tau / self.torque_constants[side]

    def ee_pose(self, side: str):
        return forward_kinematics(self.chains[side], self.arms[side].q)
