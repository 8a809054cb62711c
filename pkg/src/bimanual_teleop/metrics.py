"""Post-hoc quality metrics computed from session logs.

All series come from the log alone, so any stored run can be graded.
Wall-clock latencies never appear in logs (determinism); they arrive as
an optional sidecar list collected live and contribute only the p50/p99
summary fields.

The jerk proxy is the third difference of the commanded joint vector,
``q[i] - 3 q[i-1] + 3 q[i-2] - q[i-3]``: cheap, parameter-free, and
zero exactly on any quadratic-in-time command segment. A single step in
one joint shows up in exactly three consecutive ticks (the kernel
width), which the tests pin down.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .geometry import quat_to_rotation, rotation_distance
from .simulator import SIDES


@dataclass
class SessionMetrics:
    ticks: int
    # Per-tick series, NaN where undefined (no target yet, warm-up ticks).
    tracking_pos: dict[str, np.ndarray]  # m
    tracking_rot: dict[str, np.ndarray]  # rad
    jerk: dict[str, np.ndarray]  # rad per tick^3, max over joints
    vibration: dict[str, np.ndarray]
    # Summary scalars.
    jerk_rms: dict[str, float]
    tracking_pos_final: dict[str, float]
    residual_mean: dict[str, float]
    residual_max: dict[str, float]
    watchdog_trips: dict[str, int]
    hold_ticks: dict[str, int]
    latency_p50_us: float | None = None
    latency_p99_us: float | None = None

    def summary(self) -> dict:
        out: dict = {"ticks": self.ticks}
        for side in SIDES:
            out[side] = {
                "jerk_rms": self.jerk_rms[side],
                "tracking_pos_final_m": self.tracking_pos_final[side],
                "residual_mean": self.residual_mean[side],
                "residual_max": self.residual_max[side],
                "watchdog_trips": self.watchdog_trips[side],
                "hold_ticks": self.hold_ticks[side],
            }
        if self.latency_p50_us is not None:
            out["latency_p50_us"] = self.latency_p50_us
            out["latency_p99_us"] = self.latency_p99_us
        return out


def _pose_error(ee: list | None, target: list | None) -> tuple[float, float]:
    if ee is None or target is None:
        return math.nan, math.nan
    pos = float(np.linalg.norm(np.asarray(ee[:3]) - np.asarray(target[:3])))
    rot = float(
        rotation_distance(
            quat_to_rotation(np.asarray(ee[3:])), quat_to_rotation(np.asarray(target[3:]))
        )
    )
    return pos, rot


def _third_difference(commands: np.ndarray) -> np.ndarray:
    """Per-tick max-over-joints |third difference|; NaN for the first
    three warm-up ticks where the kernel does not fit."""
    n = len(commands)
    out = np.full(n, np.nan)
    if n >= 4:
        d3 = commands[3:] - 3 * commands[2:-1] + 3 * commands[1:-2] - commands[:-3]
        out[3:] = np.max(np.abs(d3), axis=1)
    return out


def compute_metrics(rows: list[dict], latencies: list[float] | None = None) -> SessionMetrics:
    n = len(rows)
    tracking_pos = {}
    tracking_rot = {}
    jerk = {}
    vibration = {}
    jerk_rms = {}
    tracking_final = {}
    res_mean = {}
    res_max = {}
    trips = {}
    holds = {}
    for side in SIDES:
        pos = np.empty(n)
        rot = np.empty(n)
        vib = np.empty(n)
        residuals = []
        hold_count = 0
        cmds = []
        for i, row in enumerate(rows):
            rec = row[side]
            pos[i], rot[i] = _pose_error(rec["ee"], rec["target"])
            vib[i] = rec["haptic"]["vib"]
            if rec["res"] is not None:
                residuals.append(rec["res"])
            if rec["held"]:
                hold_count += 1
            cmds.append(rec["cmd"])
        tracking_pos[side] = pos
        tracking_rot[side] = rot
        vibration[side] = vib
        d3 = _third_difference(np.asarray(cmds)) if n else np.empty(0)
        jerk[side] = d3
        finite = d3[np.isfinite(d3)]
        jerk_rms[side] = float(np.sqrt(np.mean(finite**2))) if finite.size else 0.0
        finite_pos = pos[np.isfinite(pos)]
        tracking_final[side] = float(finite_pos[-1]) if finite_pos.size else math.nan
        res_mean[side] = float(np.mean(residuals)) if residuals else math.nan
        res_max[side] = float(np.max(residuals)) if residuals else math.nan
        trips[side] = int(rows[-1][side]["watchdog"]["trips"]) if n else 0
        holds[side] = hold_count

    p50 = p99 = None
    if latencies:
        arr = np.asarray(latencies, dtype=np.float64)
        p50 = float(np.percentile(arr, 50))
        p99 = float(np.percentile(arr, 99))

    return SessionMetrics(
        ticks=n,
        tracking_pos=tracking_pos,
        tracking_rot=tracking_rot,
        jerk=jerk,
        vibration=vibration,
        jerk_rms=jerk_rms,
        tracking_pos_final=tracking_final,
        residual_mean=res_mean,
        residual_max=res_max,
        watchdog_trips=trips,
        hold_ticks=holds,
        latency_p50_us=p50,
        latency_p99_us=p99,
    )


def _cell(value: float) -> str:
    return "" if math.isnan(value) else repr(float(value))


def metrics_to_csv(named: list[tuple[str, SessionMetrics]]) -> str:
    """Per-tick CSV. Multiple named runs land side by side with suffixed
    columns, so an A/B pair is directly diffable."""
    if not named:
        raise ValueError("need at least one metrics object")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["tick"]
    for name, _ in named:
        suffix = f"_{name}" if len(named) > 1 else ""
        for side in SIDES:
            header += [
                f"err_pos_{side}{suffix}",
                f"err_rot_{side}{suffix}",
                f"jerk_{side}{suffix}",
                f"vib_{side}{suffix}",
            ]
    writer.writerow(header)
    ticks = max(m.ticks for _, m in named)
    for i in range(ticks):
        row = [str(i)]
        for _, m in named:
            for side in SIDES:
                if i < m.ticks:
                    row += [
                        _cell(m.tracking_pos[side][i]),
                        _cell(m.tracking_rot[side][i]),
                        _cell(m.jerk[side][i]),
                        _cell(m.vibration[side][i]),
                    ]
                else:
                    row += ["", "", "", ""]
        writer.writerow(row)
    return buf.getvalue()


def write_metrics_csv(named: list[tuple[str, SessionMetrics]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(metrics_to_csv(named))
