"""End-to-end checks of the command line interface.

Everything runs through cli.main(argv) in-process so coverage and
debuggers see it, except one subprocess check that the installed
console script agrees on exit codes.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from bimanual_teleop import cli
from bimanual_teleop.coordination import load_library
from bimanual_teleop.session import read_log
from bimanual_teleop.traces import parse_trace


def run(argv, capsys):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_gen_trace_all_scenarios_parse_back(tmp_path, capsys):
    for scenario in ("line", "arc", "step", "spike", "fuzz"):
        out = tmp_path / f"{scenario}.trace"
        code, _, err = run(
            ["gen-trace", scenario, "--out", str(out), "--ticks", "20", "--hold", "10"],
            capsys,
        )
        assert code == 0, err
        frames = parse_trace(out.read_text())
        assert len(frames) == 2 * 30


def test_replay_then_metrics_round_trip(tmp_path, capsys):
    trace = tmp_path / "t.trace"
    log = tmp_path / "t.log"
    lat = tmp_path / "t.lat"
    csv = tmp_path / "t.csv"
    assert run(["gen-trace", "line", "--out", str(trace), "--ticks", "40", "--hold", "20"], capsys)[0] == 0
    code, _, err = run(
        ["replay", str(trace), "--out", str(log), "--latency-out", str(lat)], capsys
    )
    assert code == 0
    assert "replayed 60 ticks" in err
    rows = read_log(log)
    assert len(rows) == 60
    sidecar = [float(x) for x in lat.read_text().split()]
    assert len(sidecar) == 60

    code, _, err = run(
        ["metrics", str(log), "--latencies", str(lat), "--out", str(csv)], capsys
    )
    assert code == 0
    summary = json.loads(err.splitlines()[-1])
    assert summary["run"] == "t"
    assert summary["ticks"] == 60
    assert summary["latency_p50_us"] > 0
    header = csv.read_text().splitlines()[0]
    assert header.startswith("tick,err_pos_left")


def test_metrics_two_logs_ab(tmp_path, capsys):
    trace = tmp_path / "t.trace"
    run(["gen-trace", "line", "--out", str(trace), "--ticks", "10", "--hold", "5"], capsys)
    a = tmp_path / "a.log"
    b = tmp_path / "b.log"
    run(["replay", str(trace), "--out", str(a)], capsys)
    run(["replay", str(trace), "--out", str(b)], capsys)
    csv = tmp_path / "ab.csv"
    code, _, err = run(["metrics", str(a), str(b), "--out", str(csv)], capsys)
    assert code == 0
    header = csv.read_text().splitlines()[0]
    assert "err_pos_left_a" in header and "err_pos_left_b" in header
    assert len(err.splitlines()) == 2


def test_replay_empty_trace_exits_zero(tmp_path, capsys):
    trace = tmp_path / "empty.trace"
    trace.write_text("")
    log = tmp_path / "empty.log"
    code, _, err = run(["replay", str(trace), "--out", str(log)], capsys)
    assert code == 0
    assert "replayed 0 ticks" in err
    assert log.read_text() == ""


def test_replay_stdout_matches_file(tmp_path, capsys):
    trace = tmp_path / "t.trace"
    run(["gen-trace", "step", "--out", str(trace), "--ticks", "8", "--hold", "4"], capsys)
    log = tmp_path / "t.log"
    run(["replay", str(trace), "--out", str(log)], capsys)
    code, out, _ = run(["replay", str(trace)], capsys)
    assert code == 0
    assert out == log.read_text()


def test_malformed_trace_exit_3(tmp_path, capsys):
    trace = tmp_path / "bad.trace"
    trace.write_text('{"not": "a frame"}\n')
    code, _, err = run(["replay", str(trace)], capsys)
    assert code == 3
    assert "trace error" in err and "line 1" in err


def test_bad_config_exit_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[ik]\ndamping = banana\n")
    trace = tmp_path / "t.trace"
    trace.write_text("")
    code, _, err = run(["replay", str(trace), "--config", str(cfg)], capsys)
    assert code == 2
    assert "config error" in err


def test_missing_trace_file_exit_1(tmp_path, capsys):
    code, _, err = run(["replay", str(tmp_path / "nope.trace")], capsys)
    assert code == 1
    assert "error" in err


def test_usage_error_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["gen-trace", "line", "--ticks", "many"])
    assert exc.value.code == 1


def test_record_ref_appends(tmp_path, capsys):
    from pathlib import Path

    from bimanual_teleop.config import default_config

    src = Path(default_config().reference_library)
    lib_copy = tmp_path / "refs.lib"
    lib_copy.write_text(src.read_text())
    before = len(load_library(lib_copy).entries)
    code, _, err = run(
        ["record-ref", "--label", "smoke", "--library", str(lib_copy)], capsys
    )
    assert code == 0
    lib = load_library(lib_copy)
    assert len(lib.entries) == before + 1
    assert lib.entries[-1].label == "smoke"
    np.testing.assert_allclose(lib.entries[-1].left, lib.entries[-1].right)


def test_record_ref_from_log(tmp_path, capsys):
    trace = tmp_path / "t.trace"
    log = tmp_path / "t.log"
    run(["gen-trace", "line", "--out", str(trace), "--ticks", "10", "--hold", "5"], capsys)
    run(["replay", str(trace), "--out", str(log)], capsys)
    lib_copy = tmp_path / "refs.lib"
    from pathlib import Path

    from bimanual_teleop.config import default_config

    lib_copy.write_text(Path(default_config().reference_library).read_text())
    code, _, _ = run(
        [
            "record-ref",
            "--label",
            "fromlog",
            "--library",
            str(lib_copy),
            "--from-log",
            str(log),
            "--tick",
            "14",
        ],
        capsys,
    )
    assert code == 0
    entry = load_library(lib_copy).entries[-1]
    row = read_log(log)[14]
    np.testing.assert_array_equal(entry.left, np.asarray(row["left"]["cmd"]))

    code, _, err = run(
        ["record-ref", "--label", "oob", "--library", str(lib_copy), "--from-log", str(log), "--tick", "99"],
        capsys,
    )
    assert code == 3
    assert "outside log" in err


def test_export_fk_fixtures(tmp_path, capsys):
    out = tmp_path / "fx.json"
    code, _, _ = run(["export-fk-fixtures", "--out", str(out), "--count", "7"], capsys)
    assert code == 0
    data = json.loads(out.read_text())
    assert data["tolerance"] == 1e-6
    assert len(data["sides"]["left"]) == 7
    case = data["sides"]["left"][0]
    assert set(case) == {"q", "pos", "quat"}


def test_console_script_exit_codes():
    """The installed entry point must agree with main() on exit codes."""
    r = subprocess.run(
        [sys.executable, "-m", "bimanual_teleop.cli", "bogus"],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 1
    r = subprocess.run(
        [sys.executable, "-m", "bimanual_teleop.cli", "gen-trace", "line", "--ticks", "4", "--hold", "2"],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0
    assert parse_trace(r.stdout)
