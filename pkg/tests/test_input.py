"""Input pipeline tests: trace files, filtering, retargeting.

Oracles: retargeting against 4x4 matrix products; the filter step
response against the geometric decay (1 - alpha)^n computed in-test.
"""

import numpy as np
import pytest

from bimanual_teleop import retargeting as rt
from bimanual_teleop import traces
from bimanual_teleop.errors import (
    AlreadyCalibrated,
    DimensionMismatch,
    NotCalibrated,
    TraceFormatError,
)
from bimanual_teleop.geometry import Pose, rotation_distance, rotation_exp, rotation_to_quat

DT = 0.004
IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def frame(t, side="left", pos=(0, 0, 0), quat=IDENTITY_QUAT, **kw):
    return traces.TeleopFrame(
        timestamp=t, side=side, position=np.asarray(pos, dtype=float), quat_wxyz=quat, **kw
    )


def random_pose(rng):
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    return Pose(rotation_exp(axis * rng.uniform(0, 2.5)), rng.uniform(-1, 1, 3))


# ------------------------------------------------------------------ traces


def test_trace_write_read_is_byte_exact(tmp_path):
    rng = np.random.default_rng(70)
    frames = []
    t = 0.0
    for i in range(50):
        t += DT
        for side in ("left", "right"):
            axis = rng.standard_normal(3)
            axis /= np.linalg.norm(axis)
            frames.append(
                frame(
                    t,
                    side=side,
                    pos=rng.uniform(-1, 1, 3),
                    quat=rotation_to_quat(rotation_exp(axis * rng.uniform(0, 3))),
                    gripper=float(rng.uniform(0, 1)),
                    buttons=int(rng.integers(0, 16)),
                    leader_joints=rng.uniform(-1, 1, 7) if i % 2 else None,
                )
            )
    path = tmp_path / "trace.jsonl"
    traces.write_trace(frames, path)
    first = path.read_bytes()
    back = traces.read_trace(path)
    assert len(back) == len(frames)
    traces.write_trace(back, path)
    assert path.read_bytes() == first  # write(read(f)) == f
    for a, b in zip(frames, back):
        assert a.timestamp == b.timestamp and a.side == b.side
        assert np.array_equal(a.position, b.position)
        assert np.array_equal(a.quat_wxyz, b.quat_wxyz)
        assert (a.leader_joints is None) == (b.leader_joints is None)
        if a.leader_joints is not None:
            assert np.array_equal(a.leader_joints, b.leader_joints)


def test_trace_shared_timestamps_across_sides_allowed():
    text = (
        traces.canonical_json_line(traces.frame_to_record(frame(0.004, "left")))
        + traces.canonical_json_line(traces.frame_to_record(frame(0.004, "right")))
        + traces.canonical_json_line(traces.frame_to_record(frame(0.008, "left")))
    )
    assert len(traces.parse_trace(text)) == 3


@pytest.mark.parametrize(
    "frames,message",
    [
        ([frame(0.008), frame(0.004)], "decreases"),
        ([frame(0.004), frame(0.004)], "does not increase"),
    ],
)
def test_trace_rejects_non_monotone_timestamps(frames, message):
    with pytest.raises(TraceFormatError, match=message) as info:
        traces.parse_trace("".join(traces.canonical_json_line(traces.frame_to_record(f)) for f in frames))
    assert info.value.line == 2


def test_trace_rejects_value_faults():
    good = traces.canonical_json_line(traces.frame_to_record(frame(0.004)))
    with pytest.raises(TraceFormatError, match="bad JSON"):
        traces.parse_trace(good + "{not json\n")
    with pytest.raises(TraceFormatError, match="unknown keys"):
        record = traces.frame_to_record(frame(0.008))
        record["velocity"] = 1.0
        traces.parse_trace(good + traces.canonical_json_line(record))
    with pytest.raises(TraceFormatError, match="missing keys"):
        record = traces.frame_to_record(frame(0.008))
        del record["quat"]
        traces.parse_trace(good + traces.canonical_json_line(record))
    with pytest.raises(TraceFormatError, match="quaternion norm"):
        record = traces.frame_to_record(frame(0.008))
        record["quat"] = [1.001, 0.0, 0.0, 0.0]
        traces.parse_trace(good + traces.canonical_json_line(record))
    with pytest.raises(TraceFormatError, match="non-finite"):
        record = traces.frame_to_record(frame(0.008))
        record["pos"] = [0.0, 0.0, float("nan")]
        text = good + traces.canonical_json_line({**record, "pos": [0.0, 0.0, None]}).replace(
            "null", "NaN"
        )
        traces.parse_trace(text)
    with pytest.raises(TraceFormatError, match="gripper"):
        record = traces.frame_to_record(frame(0.008, gripper=0.0))
        record["gripper"] = 1.5
        traces.parse_trace(good + traces.canonical_json_line(record))
    assert traces.parse_trace("") == []  # empty traces are legal


def test_writer_refuses_malformed_frames():
    bad = frame(0.004, pos=(np.nan, 0, 0))
    with pytest.raises(TraceFormatError, match="non-finite"):
        traces.trace_to_text([bad])
    with pytest.raises(TraceFormatError, match="does not increase"):
        traces.trace_to_text([frame(0.004), frame(0.004)])


# ------------------------------------------------------------------ filter


def make_filter(**kw):
    return rt.InputFilter(rt.FilterParams(**kw))


def test_filter_step_response_matches_geometric_decay():
    f = make_filter(alpha=0.3)
    f.process(frame(0.0))
    step = np.array([0.005, 0.0, 0.0])  # within 2 m/s * 4 ms = 8 mm
    err = 1.0  # relative to the step size
    t = 0.0
    for n in range(1, 20):
        t += DT
        result = f.process(frame(t, pos=step))
        assert result.accepted
        err *= 0.7
        got = np.linalg.norm(result.sample.position - step) / np.linalg.norm(step)
        assert got == pytest.approx(err, rel=1e-9)
    # Error drops below 1% after 13 samples: 0.7^13 = 0.0097.
    assert 0.7**13 < 0.01 < 0.7**12


def test_filter_rotation_blends_geodesically():
    f = make_filter(alpha=0.3)
    f.process(frame(0.0))
    target = rotation_exp(np.array([0.0, 0.0, 0.02]))  # 0.02 rad < 6 rad/s * 4 ms
    q = rotation_to_quat(target)
    angle = 0.02
    t = 0.0
    for _ in range(10):
        t += DT
        result = f.process(frame(t, quat=q))
        assert result.accepted
        angle *= 0.7
        assert rotation_distance(result.sample.rotation, target) == pytest.approx(angle, rel=1e-6)


def test_filter_rejects_translation_spike_and_holds():
    f = make_filter()
    f.process(frame(0.0, pos=(0.1, 0, 0)))
    result = f.process(frame(DT, pos=(1.1, 0, 0)))  # 1 m in 4 ms
    assert not result.accepted and result.reason == "velocity"
    np.testing.assert_array_equal(result.sample.position, [0.1, 0, 0])
    assert result.sample.timestamp == DT  # held value advances in time
    # Recovery: a sane sample right after is accepted.
    ok = f.process(frame(2 * DT, pos=(0.102, 0, 0)))
    assert ok.accepted


def test_filter_rejects_rotation_spike():
    f = make_filter()
    f.process(frame(0.0))
    q = rotation_to_quat(rotation_exp(np.array([0.5, 0, 0])))  # 0.5 rad in 4 ms
    result = f.process(frame(DT, quat=q))
    assert not result.accepted and result.reason == "velocity"
    np.testing.assert_array_equal(result.sample.rotation, np.eye(3))


def test_filter_rejects_non_finite_and_timestamp_faults():
    f = make_filter()
    f.process(frame(0.0, pos=(0.5, 0, 0)))
    r1 = f.process(frame(DT, pos=(np.nan, 0, 0)))
    assert not r1.accepted and r1.reason == "non_finite"
    r2 = f.process(frame(DT / 2, pos=(0.5, 0, 0)))  # goes backwards
    assert not r2.accepted and r2.reason == "timestamp"
    assert r2.sample.timestamp == DT  # timestamp faults do not advance the clock
    r3 = f.process(frame(np.nan, pos=(0.5, 0, 0)))
    assert not r3.accepted and r3.reason == "timestamp"
    r4 = f.process(frame(2 * DT, pos=(0.5005, 0, 0)))
    assert r4.accepted
    bad_quat = f.process(frame(3 * DT, quat=np.array([0.9, 0.0, 0.0, 0.0])))
    assert not bad_quat.accepted and bad_quat.reason == "non_finite"


def test_filter_output_never_violates_velocity_bound():
    # Adversarial stream: smooth motion, spikes, NaN, stalls, jitter.
    params = rt.FilterParams(alpha=0.3, max_linear_velocity=2.0, max_angular_velocity=6.0)
    f = rt.InputFilter(params)
    rng = np.random.default_rng(71)
    t = 0.0
    pos = np.zeros(3)
    last = None
    for _ in range(3000):
        t += DT
        roll = rng.uniform()
        if roll < 0.7:
            pos = pos + rng.uniform(-0.004, 0.004, 3)
            p = pos
        elif roll < 0.8:
            p = pos + rng.uniform(-5, 5, 3)  # spike
        elif roll < 0.9:
            p = np.array([np.nan, 0, 0])
        else:
            p = pos
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        q = rotation_to_quat(rotation_exp(axis * rng.uniform(0, 0.02)))
        result = f.process(frame(t, pos=p, quat=q))
        s = result.sample
        assert np.all(np.isfinite(s.position))
        if last is not None and s.timestamp > last.timestamp:
            dt = s.timestamp - last.timestamp
            assert np.linalg.norm(s.position - last.position) <= params.max_linear_velocity * dt + 1e-12
            assert rotation_distance(last.rotation, s.rotation) <= params.max_angular_velocity * dt + 1e-12
        last = s


def test_filter_clamps_gripper():
    f = make_filter()
    r = f.process(frame(0.0, gripper=2.0))
    assert r.sample.gripper == 1.0


def test_filter_reset_accepts_teleport():
    f = make_filter()
    f.process(frame(0.0))
    f.reset()
    r = f.process(frame(DT, pos=(3.0, 0, 0)))  # would be a spike without reset
    assert r.accepted


# -------------------------------------------------------------- retargeting


def test_identity_anchors_reproduce_controller_pose():
    state = rt.calibrate(Pose.identity(), Pose.identity())
    rng = np.random.default_rng(72)
    for _ in range(20):
        c = random_pose(rng)
        out = rt.retarget(state, c)
        np.testing.assert_allclose(out.matrix(), c.matrix(), atol=1e-12)


def test_world_mode_matches_matrix_oracle():
    rng = np.random.default_rng(73)
    for _ in range(100):
        c0, r0, c = random_pose(rng), random_pose(rng), random_pose(rng)
        state = rt.calibrate(c0, r0)
        got = rt.retarget(state, c)
        want = np.linalg.inv(c0.matrix()) @ c.matrix() @ r0.matrix()
        np.testing.assert_allclose(got.matrix(), want, atol=1e-10)


def test_tool_mode_matches_matrix_oracle():
    rng = np.random.default_rng(74)
    for _ in range(100):
        c0, r0, c = random_pose(rng), random_pose(rng), random_pose(rng)
        state = rt.calibrate(c0, r0, frame_mode="tool")
        got = rt.retarget(state, c)
        want = r0.matrix() @ np.linalg.inv(c0.matrix()) @ c.matrix()
        np.testing.assert_allclose(got.matrix(), want, atol=1e-10)


def test_world_mode_is_left_equivariant():
    rng = np.random.default_rng(75)
    for _ in range(50):
        c0, r0, c, w = (random_pose(rng) for _ in range(4))
        plain = rt.retarget(rt.calibrate(c0, r0), c)
        moved = rt.retarget(
            rt.calibrate(Pose.from_matrix(w.matrix() @ c0.matrix()), r0),
            Pose.from_matrix(w.matrix() @ c.matrix()),
        )
        np.testing.assert_allclose(moved.matrix(), plain.matrix(), atol=1e-9)


def test_re_anchor_is_continuous():
    rng = np.random.default_rng(76)
    c0, r0 = random_pose(rng), random_pose(rng)
    state = rt.calibrate(c0, r0)
    c_now = random_pose(rng)
    desired_before = rt.retarget(state, c_now)
    state2 = rt.re_anchor(state, c_now, desired_before)
    desired_after = rt.retarget(state2, c_now)
    assert (
        np.max(np.abs(desired_after.matrix() - desired_before.matrix())) < 1e-9
    )  # no jump at the re-anchor instant


def test_calibration_errors():
    state = rt.calibrate(Pose.identity(), Pose.identity())
    with pytest.raises(AlreadyCalibrated):
        rt.calibrate(Pose.identity(), Pose.identity(), existing=state)
    with pytest.raises(NotCalibrated):
        rt.retarget(None, Pose.identity())
    with pytest.raises(NotCalibrated):
        rt.re_anchor(None, Pose.identity(), Pose.identity())


def test_leader_joint_delta():
    anchor = np.array([0.1, 0.2, 0.3])
    lf = frame(0.0, leader_joints=np.array([0.2, 0.2, 0.2]))
    np.testing.assert_allclose(
        rt.leader_joint_delta(lf, anchor, "leader_follower"), [0.1, 0.0, -0.1], atol=1e-15
    )
    np.testing.assert_array_equal(rt.leader_joint_delta(lf, anchor, "vr"), np.zeros(3))
    with pytest.raises(DimensionMismatch):
        rt.leader_joint_delta(frame(0.0), anchor, "leader_follower")
    with pytest.raises(DimensionMismatch):
        rt.leader_joint_delta(
            frame(0.0, leader_joints=np.zeros(4)), anchor, "leader_follower"
        )
