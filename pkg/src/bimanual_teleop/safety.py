"""Per-tick command watchdog.

Runs inline in the control loop (evaluated on every candidate command
after null-space augmentation and limit clamping), never in a separate
thread: an inline gate can replace the offending command in the same
tick, which a monitoring thread cannot.

Two per-joint limits, both strict (a value exactly at the boundary
passes):

* velocity:  |dq| / dt > max_joint_velocity
* jump:      |dq|      > max_tick_jump

Trip actions: ``halt`` re-issues the previous command; ``attenuate``
scales the increment uniformly to the tighter boundary, preserving
direction.  Non-finite commands always fall back to the previous
command, whatever the action, since scaling NaN is meaningless.

After a trip the gate stays engaged for ``cooldown_ticks`` further
ticks; in halt mode commands are held for the whole cooldown, in
attenuate mode they remain subject to the boundary.  A trip during
cooldown restarts it.  Resuming requires the cooldown to expire and the
next command to pass on its own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True)
class WatchdogPolicy:
    max_joint_velocity: float = 3.0  # rad/s
    max_tick_jump: float = 0.1  # rad
    trip_action: str = "attenuate"  # or "halt"
    cooldown_ticks: int = 20

    def __post_init__(self):
        if self.max_joint_velocity <= 0 or self.max_tick_jump <= 0:
            raise ValueError("watchdog limits must be positive")
        if self.trip_action not in ("halt", "attenuate"):
            raise ValueError(f"unknown trip action {self.trip_action!r}")
        if self.cooldown_ticks < 0:
            raise ValueError("cooldown_ticks must be non-negative")


@dataclass(frozen=True)
class WatchdogCheck:
    tripped: bool
    indices: np.ndarray  # offending joints
    magnitudes: np.ndarray  # |dq| at those joints


@dataclass(frozen=True)
class WatchdogEvent:
    indices: tuple[int, ...]
    magnitudes: tuple[float, ...]
    action: str


def check(prev_cmd, next_cmd, dt: float, policy: WatchdogPolicy) -> WatchdogCheck:
    """Flag joints whose per-tick move violates either limit (strictly)."""
    prev = np.asarray(prev_cmd, dtype=np.float64)
    nxt = np.asarray(next_cmd, dtype=np.float64)
    if prev.shape != nxt.shape:
        raise DimensionMismatch(f"command shapes differ: {prev.shape} vs {nxt.shape}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    delta = np.abs(nxt - prev)
    bad = ~np.isfinite(nxt)
    with np.errstate(invalid="ignore"):
        bad |= delta > policy.max_tick_jump
        bad |= delta > policy.max_joint_velocity * dt
    indices = np.nonzero(bad)[0]
    return WatchdogCheck(tripped=bool(indices.size), indices=indices, magnitudes=delta[indices])


class Watchdog:
    """Stateful gate wrapping ``check`` with trip actions and cooldown."""

    def __init__(self, policy: WatchdogPolicy):
        self.policy = policy
        self.cooldown_remaining = 0
        self.trip_count = 0
        self._last_state = "ok"

    @property
    def state(self) -> str:
        """What the most recent gate call did: ok, cooldown, or tripped."""
        return self._last_state

    def _bound(self, dt: float) -> float:
        return min(self.policy.max_tick_jump, self.policy.max_joint_velocity * dt)

    def gate(self, prev_cmd, next_cmd, dt: float):
        """Return (safe command, WatchdogEvent or None)."""
        prev = np.asarray(prev_cmd, dtype=np.float64)
        nxt = np.asarray(next_cmd, dtype=np.float64)
        result = check(prev, nxt, dt, self.policy)

        if result.tripped:
            self.trip_count += 1
            self.cooldown_remaining = self.policy.cooldown_ticks
            self._last_state = "tripped"
            if self.policy.trip_action == "halt" or not np.all(np.isfinite(nxt)):
                out = prev.copy()
            else:
                scale = self._bound(dt) / float(np.max(np.abs(nxt - prev)))
                out = prev + scale * (nxt - prev)
            event = WatchdogEvent(
                indices=tuple(int(i) for i in result.indices),
                magnitudes=tuple(float(m) for m in result.magnitudes),
                action=self.policy.trip_action,
            )
            return out, event

        if self.cooldown_remaining > 0:
            self.cooldown_remaining -= 1
            self._last_state = "cooldown"
            if self.policy.trip_action == "halt":
                return prev.copy(), None
            return nxt.copy(), None
        self._last_state = "ok"
        return nxt.copy(), None
