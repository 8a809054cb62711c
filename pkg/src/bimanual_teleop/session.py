"""Per-tick teleoperation pipeline and trace replay.

One :class:`Session` owns all mutable control state for a bimanual run:
two input filters, two retarget anchors, the dual-arm simulator, two
watchdogs, two haptic channels, and the shared reference library. Each
``run_tick`` executes the stage order

    input -> filter -> retarget -> IK -> reference selection ->
    null-space -> safety -> simulate -> haptics

with the left and right pipelines sharing code but not state. Reference
selection is the only cross-arm coupling point: one joint nearest-entry
lookup feeds both arms' null-space attractions.

Fault containment: any error raised by a pipeline stage downgrades that
side to a hold tick (the previous command is re-issued) and is recorded
on the report; it never propagates out of ``run_tick``. A side with no
frame this tick holds the same way. Together with the watchdog this
keeps a single malformed frame from ever terminating a session.

IK linearizes at the commanded configuration, not the measured one, so
the command integrator is independent of the follower PD lag; the
simulator then tracks the command stream with its own dynamics.

Replay is deterministic: tick timestamps come from the trace (dt from
consecutive tick groups), wall-clock latency is collected separately
and never enters the log, and two replays of the same trace and config
produce byte-identical logs.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .config import SessionConfig
from .coordination import (
    ReferencePoseLibrary,
    augment,
    load_library,
    nullspace_increment,
    select_reference,
)
from .errors import TraceFormatError
from .geometry import Pose, rotation_to_quat
from .haptics import HapticChannel
from .ik import cartesian_error, solve_task_increment
from .kinematics import KinematicChain, body_jacobian, clamp_to_limits, forward_kinematics, load_chain
from .retargeting import InputFilter, calibrate, re_anchor, retarget
from .safety import Watchdog
from .simulator import SIDES, DualArmSimulator
from .traces import TeleopFrame, canonical_json_line

# Button bit 0: clutch. While set the side holds position and its anchors
# follow the controller, so the operator can reposition freely.
CLUTCH_BIT = 0x1


@dataclass
class SideReport:
    """Everything one arm's pipeline produced this tick."""

    accepted: bool = False
    reject_reason: str | None = None
    rejects: int = 0  # cumulative filter rejections for this side
    fault: str | None = None
    held: bool = True
    clutched: bool = False
    calibrated: bool = False
    target: Pose | None = None
    ik_residual: float | None = None
    dq_task_norm: float = 0.0
    dq_null_norm: float = 0.0
    step_clipped: bool = False
    watchdog_state: str = "ok"
    watchdog_trips: int = 0
    command: np.ndarray | None = None
    q: np.ndarray | None = None
    ee: Pose | None = None
    gripper: float = 0.0
    tau_ext_norm: float = 0.0
    vibration: float = 0.0


@dataclass
class TickReport:
    tick: int
    timestamp: float
    dt: float
    sides: dict[str, SideReport]
    reference_index: int | None
    reference_label: str | None
    stage_stamps: tuple[str, ...]
    latency_us: float  # wall clock; excluded from the log on purpose


class Session:
    """Mutable control-loop state plus the per-tick pipeline."""

    def __init__(
        self,
        config: SessionConfig,
        chains: dict[str, KinematicChain] | None = None,
        library: ReferencePoseLibrary | None = None,
    ):
        self.config = config
        if chains is None:
            chains = {
                "left": load_chain(config.left_chain),
                "right": load_chain(config.right_chain),
            }
        self.chains = chains
        if library is None:
            library = load_library(config.reference_library)
        self.library = library
        self.frame_mode = config.frame_mode
        haptic_params = {s: config.haptics.to_params(chains[s].dof) for s in SIDES}
        self.sim = DualArmSimulator(
            chains,
            gains=config.pd_gains,
            torque_constants={s: haptic_params[s].torque_constants for s in SIDES},
        )
        self.filters = {s: InputFilter(config.filter_params) for s in SIDES}
        self.retarget_states = {s: None for s in SIDES}
        self.watchdogs = {s: Watchdog(config.watchdog_policy) for s in SIDES}
        self.channels = {s: HapticChannel(chains[s], haptic_params[s]) for s in SIDES}
        self.commands = {s: chains[s].home.copy() for s in SIDES}
        self.grippers = {s: 0.0 for s in SIDES}
        self.prev_leader = {s: None for s in SIDES}
        self.reject_counts = {s: 0 for s in SIDES}
        self.tick = 0
        self.timestamp = 0.0

    # -- operator-facing controls (gateway commands route here) --------

    def commanded_pose(self, side: str) -> Pose:
        return forward_kinematics(self.chains[side], self.commands[side])

    def calibrate_side(self, side: str, control_pose: Pose) -> None:
        """Anchor a controller pose to the arm's current commanded pose.

        Re-running is legal and just re-anchors (the clutch affordance).
        """
        existing = self.retarget_states[side]
        robot = self.commanded_pose(side)
        if existing is None:
            self.retarget_states[side] = calibrate(
                control_pose, robot, frame_mode=self.frame_mode
            )
        else:
            self.retarget_states[side] = re_anchor(existing, control_pose, robot)
        self.filters[side].reset()
        self.prev_leader[side] = None

    def set_frame_mode(self, frame_mode: str) -> None:
        """Switch world/tool mapping. Drops anchors; sides re-calibrate
        on their next accepted frame."""
        if frame_mode not in ("world", "tool"):
            raise ValueError(f"unknown frame mode {frame_mode!r}")
        self.frame_mode = frame_mode
        self.retarget_states = {s: None for s in SIDES}

    def inject_wrench(self, side: str, wrench) -> None:
        self.sim.inject_wrench(side, wrench)

    def record_reference(self, label: str) -> int:
        """Capture the current commanded configuration pair as a library
        entry; returns its index."""
        from .coordination import ReferenceEntry

        entry = ReferenceEntry(
            label=label, left=self.commands["left"].copy(), right=self.commands["right"].copy()
        )
        self.library.add(entry)
        self.library.check_size()
        return len(self.library) - 1

    # -- the pipeline ---------------------------------------------------

    def run_tick(
        self, frames: Mapping[str, TeleopFrame | None] | None = None, dt: float | None = None
    ) -> TickReport:
        t0 = time.perf_counter()
        if frames is None:
            frames = {}
        if dt is None:
            dt = self.config.dt
        stamps: list[str] = []
        reports = {s: SideReport() for s in SIDES}
        solved: dict[str, dict] = {}

        for side in SIDES:
            rep = reports[side]
            rep.calibrated = self.retarget_states[side] is not None
            frame = frames.get(side)
            if frame is None:
                continue
            stamps.append(f"input:{side}")
            try:
                solved[side] = self._solve_side(side, frame, dt, rep, stamps)
            except Exception as exc:  # containment: a bad frame must not kill the loop
                rep.fault = f"{type(exc).__name__}: {exc}"

        index: int | None = None
        label: str | None = None
        if self.config.nullspace_enabled and len(self.library) > 0:
            stamps.append("select")
            index, entry = select_reference(
                self.library, self.commands["left"], self.commands["right"]
            )
            label = entry.label
            refs = {"left": entry.left, "right": entry.right}
        else:
            refs = None

        commands: dict[str, np.ndarray | None] = {}
        for side in SIDES:
            rep = reports[side]
            sol = solved.get(side)
            if sol is None:
                commands[side] = None  # hold: simulator re-issues the last command
                continue
            try:
                commands[side] = self._coordinate_side(side, sol, refs, dt, rep, stamps)
                rep.held = False
            except Exception as exc:
                rep.fault = f"{type(exc).__name__}: {exc}"
                commands[side] = None

        stamps.append("simulate")
        self.sim.step(commands, dt)
        self.tick = self.sim.tick
        self.timestamp += dt

        for side in SIDES:
            rep = reports[side]
            stamps.append(f"haptics:{side}")
            arm = self.sim.arms[side]
            currents = self.sim.synthesize_currents(side)
            out = self.channels[side].process(currents, arm.q, dt)
            rep.tau_ext_norm = float(np.linalg.norm(out.tau_ext))
            rep.vibration = float(out.vibration)
            rep.command = self.commands[side].copy()
            rep.q = arm.q.copy()
            rep.ee = self.sim.ee_pose(side)
            rep.gripper = self.grippers[side]
            rep.watchdog_state = self.watchdogs[side].state
            rep.watchdog_trips = self.watchdogs[side].trip_count
            rep.rejects = self.reject_counts[side]
            rep.calibrated = self.retarget_states[side] is not None

        return TickReport(
            tick=self.tick,
            timestamp=self.timestamp,
            dt=dt,
            sides=reports,
            reference_index=index,
            reference_label=label,
            stage_stamps=tuple(stamps),
            latency_us=(time.perf_counter() - t0) * 1e6,
        )

    def _solve_side(self, side, frame, dt, rep: SideReport, stamps) -> dict | None:
        """input -> filter -> retarget -> IK for one arm. Returns the
        linearization needed by the coordination phase, or None to hold."""
        stamps.append(f"filter:{side}")
        result = self.filters[side].process(frame)
        rep.accepted = result.accepted
        if not result.accepted:
            rep.reject_reason = result.reason
            self.reject_counts[side] += 1
            return None
        sample = result.sample
        self.grippers[side] = sample.gripper

        if sample.buttons & CLUTCH_BIT:
            rep.clutched = True
            self.calibrate_side(side, sample.pose())
            rep.calibrated = True
            return None

        if self.retarget_states[side] is None:
            self.calibrate_side(side, sample.pose())
        rep.calibrated = True

        stamps.append(f"retarget:{side}")
        target = retarget(self.retarget_states[side], sample.pose())
        rep.target = target

        stamps.append(f"ik:{side}")
        chain = self.chains[side]
        q_cmd = self.commands[side]
        jac = body_jacobian(chain, q_cmd)
        error = cartesian_error(forward_kinematics(chain, q_cmd), target)

        dq_ref = None
        if self.config.mode == "leader_follower" and sample.leader_joints is not None:
            prev = self.prev_leader[side]
            if prev is not None and prev.shape == sample.leader_joints.shape:
                dq_ref = sample.leader_joints - prev
            self.prev_leader[side] = sample.leader_joints

        sol = solve_task_increment(jac, error, self.config.ik_params, dq_reference=dq_ref)
        rep.ik_residual = float(np.linalg.norm(sol.cart_residual))
        rep.dq_task_norm = float(np.linalg.norm(sol.delta_q))
        rep.step_clipped = sol.clipped
        return {"jac": jac, "dq_task": sol.delta_q, "q_cmd": q_cmd}

    def _coordinate_side(self, side, sol, refs, dt, rep: SideReport, stamps) -> np.ndarray:
        """null-space -> safety for one arm; returns the gated command."""
        dq = sol["dq_task"]
        if refs is not None:
            stamps.append(f"nullspace:{side}")
            dq_null = nullspace_increment(
                sol["jac"],
                sol["q_cmd"],
                refs[side],
                sol["dq_task"],
                self.config.nullspace_params,
            )
            rep.dq_null_norm = float(np.linalg.norm(dq_null))
            dq, clipped = augment(sol["dq_task"], dq_null, self.config.ik_params.max_step)
            rep.step_clipped = rep.step_clipped or clipped

        stamps.append(f"safety:{side}")
        chain = self.chains[side]
        proposal, _ = clamp_to_limits(chain, sol["q_cmd"] + dq)
        gated, event = self.watchdogs[side].gate(self.commands[side], proposal, dt)
        if event is not None:
            rep.watchdog_state = "tripped"
        self.commands[side] = gated
        return gated


# -- session log ------------------------------------------------------


def _pose7(pose: Pose | None) -> list[float] | None:
    if pose is None:
        return None
    quat = rotation_to_quat(pose.rotation)
    return [float(v) for v in (*pose.translation, *quat)]


def _floats(values) -> list[float]:
    return [float(v) for v in values]


def log_record(report: TickReport) -> dict:
    """One canonical log row. Wall-clock latency is deliberately absent
    so replayed logs are byte-identical."""
    sides = {}
    for side, rep in report.sides.items():
        sides[side] = {
            "cmd": _floats(rep.command),
            "q": _floats(rep.q),
            "ee": _pose7(rep.ee),
            "target": _pose7(rep.target),
            "gripper": float(rep.gripper),
            "held": rep.held,
            "fault": rep.fault if rep.fault else rep.reject_reason,
            "res": None if rep.ik_residual is None else float(rep.ik_residual),
            "watchdog": {"state": rep.watchdog_state, "trips": rep.watchdog_trips},
            "haptic": {"tau": rep.tau_ext_norm, "vib": rep.vibration},
        }
    return {
        "tick": report.tick,
        "t": report.timestamp,
        "ref": report.reference_index,
        "left": sides["left"],
        "right": sides["right"],
    }


_ROW_KEYS = {"tick", "t", "ref", "left", "right"}
_SIDE_KEYS = {
    "cmd",
    "q",
    "ee",
    "target",
    "gripper",
    "held",
    "fault",
    "res",
    "watchdog",
    "haptic",
}


def log_to_text(rows: list[dict]) -> str:
    return "".join(canonical_json_line(row) for row in rows)


def parse_log(text: str, source: str = "<string>") -> list[dict]:
    rows = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"{source}: bad JSON ({exc.msg})", line_no) from None
        if set(row) != _ROW_KEYS:
            raise TraceFormatError(f"{source}: unexpected log row keys", line_no)
        for side in SIDES:
            if set(row[side]) != _SIDE_KEYS:
                raise TraceFormatError(f"{source}: unexpected {side} keys", line_no)
        rows.append(row)
    return rows


def write_log(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(log_to_text(rows))


def read_log(path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_log(fh.read(), source=str(path))


# -- replay -----------------------------------------------------------


def group_ticks(frames: list[TeleopFrame]) -> list[tuple[float, dict[str, TeleopFrame]]]:
    """Bundle frames into per-tick dictionaries keyed by exact timestamp.

    Trace validation already guarantees per-side strictly increasing and
    globally non-decreasing timestamps, so equal-stamp runs are exactly
    the left/right pairs emitted in the same control period.
    """
    ticks: list[tuple[float, dict[str, TeleopFrame]]] = []
    for frame in frames:
        if ticks and ticks[-1][0] == frame.timestamp:
            ticks[-1][1][frame.side] = frame
        else:
            ticks.append((frame.timestamp, {frame.side: frame}))
    return ticks


def replay(
    frames: list[TeleopFrame],
    config: SessionConfig,
    chains: dict[str, KinematicChain] | None = None,
    library: ReferencePoseLibrary | None = None,
) -> tuple[list[dict], list[float]]:
    """Re-run a trace headlessly. Returns (log rows, per-tick wall-clock
    latencies in µs). The rows contain no wall-clock data."""
    session = Session(config, chains=chains, library=library)
    rows: list[dict] = []
    latencies: list[float] = []
    prev_t: float | None = None
    for t, bundle in group_ticks(frames):
        dt = config.dt if prev_t is None else t - prev_t
        if dt <= 0:
            dt = config.dt  # duplicate-stamp bundles collapse upstream; belt and braces
        report = session.run_tick(bundle, dt)
        rows.append(log_record(report))
        latencies.append(report.latency_us)
        prev_t = t
    return rows, latencies
