"""External-torque estimation and haptic feedback mapping.

The only sensing assumed is per-joint motor current.  Subtracting the
configuration-dependent gravity torque from the motorside torque leaves
an estimate of externally applied joint torque:

    tau_ext = diag(kt) currents - gravity_torques(q)

Two feedback channels derive from it:

* vibration: |tau_ext|_2 mapped through min(1, |.| / scale), then a
  first-order low-pass (time constant ``vibration_tau``; 0 disables
  smoothing) so contact buzz does not flicker tick to tick.
* kinesthetic: gain * tau_ext, clipped per joint to a safe cap, for
  force-capable leader devices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput
from .kinematics import GRAVITY_DEFAULT, KinematicChain, gravity_torques


@dataclass(frozen=True)
class HapticParams:
    torque_constants: np.ndarray  # N m per A, per joint
    vibration_scale: float = 5.0  # N m of |tau_ext| mapping to intensity 1.0
    vibration_tau: float = 0.05  # s; 0 disables smoothing
    kinesthetic_gain: float = 1.0
    kinesthetic_cap: float = 5.0  # N m per joint

    def __post_init__(self):
        kt = np.array(self.torque_constants, dtype=np.float64)
        if kt.ndim != 1 or not np.all(np.isfinite(kt)) or np.any(kt <= 0):
            raise DimensionMismatch("torque_constants must be positive finite per-joint values")
        kt.flags.writeable = False
        object.__setattr__(self, "torque_constants", kt)
        if self.vibration_scale <= 0:
            raise ValueError("vibration_scale must be positive")
        if self.vibration_tau < 0:
            raise ValueError("vibration_tau must be non-negative")
        if self.kinesthetic_cap < 0:
            raise ValueError("kinesthetic_cap must be non-negative")


@dataclass(frozen=True)
class HapticOutput:
    tau_ext: np.ndarray  # N m, per joint
    vibration: float  # [0, 1], low-pass filtered
    kinesthetic: np.ndarray  # N m, per joint, capped


def estimate_external_torque(
    currents, q, chain: KinematicChain, params: HapticParams, gravity=GRAVITY_DEFAULT
) -> np.ndarray:
    """tau_ext = diag(kt) currents - gravity_torques(q)."""
    i = np.asarray(currents, dtype=np.float64)
    if i.shape != (chain.dof,):
        raise DimensionMismatch(f"currents must have shape ({chain.dof},), got {i.shape}")
    if not np.all(np.isfinite(i)):
        raise NonFiniteInput("currents contain non-finite values")
    if params.torque_constants.shape != (chain.dof,):
        raise DimensionMismatch("torque_constants do not match the chain dof")
    return params.torque_constants * i - gravity_torques(chain, q, gravity)


def vibration_intensity(tau_ext, scale: float) -> float:
    """Raw (unfiltered) intensity: min(1, |tau_ext|_2 / scale)."""
    t = np.asarray(tau_ext, dtype=np.float64)
    return float(min(1.0, np.linalg.norm(t) / scale))


def kinesthetic_command(tau_ext, params: HapticParams) -> np.ndarray:
    return np.clip(
        params.kinesthetic_gain * np.asarray(tau_ext, dtype=np.float64),
        -params.kinesthetic_cap,
        params.kinesthetic_cap,
    )


class HapticChannel:
    """Per-arm haptic pipeline holding the vibration low-pass state."""

    def __init__(self, chain: KinematicChain, params: HapticParams, gravity=GRAVITY_DEFAULT):
        self.chain = chain
        self.params = params
        self.gravity = np.asarray(gravity, dtype=np.float64)
        self.vibration_state = 0.0

    def process(self, currents, q, dt: float) -> HapticOutput:
        tau_ext = estimate_external_torque(currents, q, self.chain, self.params, self.gravity)
        raw = vibration_intensity(tau_ext, self.params.vibration_scale)
        tau = self.params.vibration_tau
        if tau == 0.0:
            self.vibration_state = raw
        else:
            # Discrete first-order low-pass; alpha -> 1 as dt >> tau.
            alpha = dt / (tau + dt)
            self.vibration_state += alpha * (raw - self.vibration_state)
        return HapticOutput(
            tau_ext=tau_ext,
            vibration=self.vibration_state,
            kinesthetic=kinesthetic_command(tau_ext, self.params),
        )
