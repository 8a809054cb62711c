"""Closed-loop session tests: pipeline order, fault containment,
convergence, replay determinism, and the session log format.
"""

import numpy as np
import pytest

from bimanual_teleop import scenarios, session as sess
from bimanual_teleop.config import default_config, parse_config
from bimanual_teleop.coordination import ReferenceEntry, ReferencePoseLibrary
from bimanual_teleop.errors import TraceFormatError
from bimanual_teleop.geometry import Pose
from bimanual_teleop.traces import SIDES, TeleopFrame, parse_trace, trace_to_text

DT = 0.004
IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def frame(t, side="left", pos=(0, 0, 0), quat=IDENTITY_QUAT, buttons=0, **kw):
    return TeleopFrame(
        timestamp=t,
        side=side,
        position=np.asarray(pos, dtype=float),
        quat_wxyz=np.asarray(quat, dtype=float),
        buttons=buttons,
        **kw,
    )


def both(t, pos=(0, 0, 0), **kw):
    return {side: frame(t, side, pos, **kw) for side in SIDES}


def make_session(**overrides):
    return sess.Session(default_config(**overrides))


# ---------------------------------------------------------------- pipeline


def test_stage_stamps_follow_documented_order():
    s = make_session()
    report = s.run_tick(both(DT))
    stamps = list(report.stage_stamps)
    select = stamps.index("select")
    simulate = stamps.index("simulate")
    for side in SIDES:
        order = [
            stamps.index(f"input:{side}"),
            stamps.index(f"filter:{side}"),
            stamps.index(f"retarget:{side}"),
            stamps.index(f"ik:{side}"),
            select,
            stamps.index(f"nullspace:{side}"),
            stamps.index(f"safety:{side}"),
            simulate,
            stamps.index(f"haptics:{side}"),
        ]
        assert order == sorted(order)


def test_first_frame_auto_calibrates_to_commanded_pose():
    s = make_session()
    home_ee = s.commanded_pose("left")
    report = s.run_tick(both(DT))
    rep = report.sides["left"]
    assert rep.calibrated and not rep.held
    np.testing.assert_allclose(rep.target.matrix(), home_ee.matrix(), atol=1e-12)
    # Identity delta: the command barely moves (null-space may drift it later).
    assert rep.ik_residual < 1e-9


def test_no_frame_side_holds_while_other_runs():
    s = make_session()
    s.run_tick(both(DT))
    before = s.commands["right"].copy()
    report = s.run_tick({"left": frame(2 * DT, "left", (0.001, 0, 0))})
    assert not report.sides["left"].held
    assert report.sides["right"].held
    np.testing.assert_array_equal(s.commands["right"], before)


def test_malformed_frame_is_contained():
    s = make_session()
    s.run_tick(both(DT))
    before = s.commands["left"].copy()
    bad = both(2 * DT)
    bad["left"] = frame(2 * DT, "left", (np.nan, 0, 0))
    report = s.run_tick(bad)
    rep = report.sides["left"]
    assert rep.held and rep.reject_reason == "non_finite"
    np.testing.assert_array_equal(s.commands["left"], before)
    assert not report.sides["right"].held  # the other arm is unaffected


def test_gripper_passthrough():
    s = make_session()
    report = s.run_tick(both(DT, gripper=0.7))
    assert report.sides["left"].gripper == pytest.approx(0.7)


# ------------------------------------------------------------- convergence


def offset_library(chains):
    lib = ReferencePoseLibrary()
    left = chains["left"].home.copy()
    right = chains["right"].home.copy()
    left[0] += 0.3
    left[2] -= 0.2
    right[0] -= 0.3
    right[2] += 0.2
    lib.add(ReferenceEntry(label="offset", left=left, right=right))
    return lib


def test_stationary_input_converges_to_fixed_point():
    cfg = default_config()
    s = sess.Session(cfg)
    s.library = offset_library(s.chains)  # real null-space pull
    home_ee = {side: s.commanded_pose(side) for side in SIDES}
    deltas = []
    for i in range(1, 401):
        prev = {side: s.commands[side].copy() for side in SIDES}
        s.run_tick(both(i * DT))
        deltas.append(
            max(np.linalg.norm(s.commands[side] - prev[side]) for side in SIDES)
        )
    assert deltas[-1] < 1e-9  # settled
    assert deltas[5] > deltas[-1]  # it actually moved first (null-space pull)
    for side in SIDES:
        drift = np.linalg.norm(
            s.commanded_pose(side).translation - home_ee[side].translation
        )
        assert drift < 5e-4  # null motion stayed out of the task space


def test_line_scenario_tracks_within_a_millimeter():
    cfg = default_config()
    frames = scenarios.generate("line", dt=DT, ticks=250, hold=250)
    rows, _ = sess.replay(frames, cfg)
    assert len(rows) == 500
    chains_session = sess.Session(cfg)
    for side in SIDES:
        target = chains_session.commanded_pose(side).translation + np.array([0.1, 0, 0])
        final_ee = np.array(rows[-1][side]["ee"][:3])
        assert np.linalg.norm(final_ee - target) < 1e-3


def test_spike_scenario_is_absorbed():
    cfg = default_config()
    frames = scenarios.generate("spike", dt=DT, ticks=250, hold=250)
    rows, _ = sess.replay(frames, cfg)
    jump_cap = cfg.watchdog_policy.max_tick_jump
    for prev, row in zip(rows, rows[1:]):
        for side in SIDES:
            jump = np.max(
                np.abs(np.array(row[side]["cmd"]) - np.array(prev[side]["cmd"]))
            )
            assert jump <= jump_cap + 1e-12
    # The outlier did not wreck tracking.
    chains_session = sess.Session(cfg)
    target = chains_session.commanded_pose("left").translation + np.array([0.1, 0, 0])
    final_ee = np.array(rows[-1]["left"]["ee"][:3])
    assert np.linalg.norm(final_ee - target) < 1e-3


# ------------------------------------------------------------------ clutch


def test_clutch_holds_then_resumes_without_jump():
    s = make_session()
    s.run_tick(both(DT))
    home = s.commands["left"].copy()
    # Clutched repositioning: controller slides 5 cm, robot must not move.
    t = DT
    for i in range(1, 11):
        t += DT
        s.run_tick(both(t, pos=(0.005 * i, 0, 0), buttons=1))
    np.testing.assert_array_equal(s.commands["left"], home)
    # Release at the displaced pose: no jump on the release tick.
    t += DT
    report = s.run_tick(both(t, pos=(0.05, 0, 0)))
    rep = report.sides["left"]
    assert not rep.held
    assert rep.ik_residual < 1e-9
    # Further motion is relative to the new anchor.
    for i in range(1, 301):
        t += DT
        s.run_tick(both(t, pos=(0.05 + min(0.01, 0.0005 * i), 0, 0)))
    moved = s.commanded_pose("left").translation
    start = sess.Session(default_config()).commanded_pose("left").translation
    np.testing.assert_allclose(moved - start, [0.01, 0, 0], atol=1e-4)


def test_set_frame_mode_drops_anchors():
    s = make_session()
    s.run_tick(both(DT))
    assert s.retarget_states["left"] is not None
    s.set_frame_mode("tool")
    assert s.retarget_states["left"] is None
    with pytest.raises(ValueError):
        s.set_frame_mode("sideways")


def test_record_reference_appends_current_configuration():
    s = make_session()
    n = len(s.library)
    idx = s.record_reference("captured")
    assert idx == n and len(s.library) == n + 1
    np.testing.assert_array_equal(s.library.entries[idx].left, s.commands["left"])


# ----------------------------------------------------------- replay + log


def test_replay_is_deterministic_to_the_byte():
    cfg = default_config()
    frames = scenarios.generate("fuzz", dt=DT, ticks=120, hold=0, seed=9)
    rows_a, lat_a = sess.replay(frames, cfg)
    rows_b, _ = sess.replay(frames, cfg)
    assert sess.log_to_text(rows_a) == sess.log_to_text(rows_b)
    assert len(lat_a) == len(rows_a)


def test_empty_trace_replays_to_empty_log():
    rows, latencies = sess.replay([], default_config())
    assert rows == [] and latencies == []


def test_replay_uses_trace_timestamps_for_dt():
    cfg = default_config()
    frames = [frame(0.004), frame(0.012)]  # 8 ms gap
    rows, _ = sess.replay(frames, cfg)
    assert rows[1]["t"] - rows[0]["t"] == pytest.approx(0.008)


def test_log_round_trip_is_exact(tmp_path):
    cfg = default_config()
    frames = scenarios.generate("arc", dt=DT, ticks=60, hold=10)
    rows, _ = sess.replay(frames, cfg)
    text = sess.log_to_text(rows)
    assert sess.parse_log(text) == rows
    path = tmp_path / "run.log"
    sess.write_log(rows, path)
    assert sess.read_log(path) == rows
    assert sess.log_to_text(sess.read_log(path)) == text  # byte fixed point


def test_log_rejects_malformed_rows():
    with pytest.raises(TraceFormatError, match="bad JSON"):
        sess.parse_log("{nope\n")
    with pytest.raises(TraceFormatError, match="row keys"):
        sess.parse_log('{"tick":1}\n')


def test_group_ticks_bundles_shared_timestamps():
    frames = [frame(DT, "left"), frame(DT, "right"), frame(2 * DT, "left")]
    ticks = sess.group_ticks(frames)
    assert len(ticks) == 2
    assert set(ticks[0][1]) == {"left", "right"}
    assert set(ticks[1][1]) == {"left"}


def test_non_monotone_trace_is_rejected_at_parse():
    good = trace_to_text([frame(2 * DT)])
    bad = trace_to_text([frame(DT)])
    with pytest.raises(TraceFormatError) as info:
        parse_trace(good + bad)
    assert info.value.line == 2


# ----------------------------------------------------------- leader mode


def test_leader_follower_mode_consumes_leader_joints():
    cfg = parse_config("[session]\nmode = leader_follower\n")
    assert cfg.ik_params.omega_q == 1.0
    s = sess.Session(cfg)
    t = 0.0
    leader = np.zeros(7)
    for i in range(1, 21):
        t += DT
        leader = leader + 0.001
        frames = {
            side: frame(t, side, leader_joints=leader.copy()) for side in SIDES
        }
        report = s.run_tick(frames)
        assert report.sides["left"].fault is None
    assert s.prev_leader["left"] is not None


def test_reject_counter_is_cumulative_and_reported():
    """Discarded input frames bump a per-side counter that rides every
    report (and thus every state message), so a UI can tell "input is
    being filtered" apart from "no input arriving"."""
    s = make_session()
    s.run_tick({"left": frame(0.004)}, DT)  # anchors; filter re-seeds next
    s.run_tick({"left": frame(0.008, pos=(0.001, 0, 0))}, DT)  # seeds filter
    rep = s.run_tick({"left": frame(0.012, pos=(1.0, 0, 0))}, DT)  # implausible
    left = rep.sides["left"]
    assert not left.accepted and left.reject_reason == "velocity"
    assert left.rejects == 1
    # stale timestamp is also a rejection, and the count accumulates
    rep = s.run_tick({"left": frame(0.012, pos=(0.001, 0, 0))}, DT)
    assert rep.sides["left"].reject_reason == "timestamp"
    assert rep.sides["left"].rejects == 2
    # frameless ticks keep reporting the cumulative value; the other side
    # is untouched
    rep = s.run_tick({}, DT)
    assert rep.sides["left"].rejects == 2
    assert rep.sides["right"].rejects == 0
    from bimanual_teleop import protocol as proto

    msg = proto.state_message(rep, seq=1, drops=0)
    assert msg["left"]["rejects"] == 2 and msg["right"]["rejects"] == 0
