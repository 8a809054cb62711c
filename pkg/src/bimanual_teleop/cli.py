"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 trace
error. argparse's default usage-failure code is 2, which collides with
the configuration slot, so the parser subclass below rewrites it.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import default_config, load_config
from .errors import ConfigError, PortInUse, TeleopError, TraceFormatError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_TRACE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load(config_path) -> "SessionConfig":
    if config_path is None:
        return default_config()
    return load_config(config_path)


def _write_or_stdout(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _cmd_replay(args) -> int:
    from .session import log_to_text, replay
    from .traces import read_trace

    config = _load(args.config)
    frames = read_trace(args.trace)
    rows, latencies = replay(frames, config)
    _write_or_stdout(log_to_text(rows), args.out)
    if args.latency_out:
        with open(args.latency_out, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(f"{v!r}\n" for v in latencies)
    trips = rows[-1]["left"]["watchdog"]["trips"] + rows[-1]["right"]["watchdog"]["trips"] if rows else 0
    print(f"replayed {len(rows)} ticks, watchdog trips: {trips}", file=sys.stderr)
    return EXIT_OK


def _cmd_metrics(args) -> int:
    from .metrics import compute_metrics, metrics_to_csv
    from .session import read_log
    from .traces import canonical_json_line

    latencies = None
    if args.latencies:
        if len(args.logs) > 1:
            raise ConfigError("--latencies applies to a single log")
        with open(args.latencies, "r", encoding="utf-8") as fh:
            latencies = [float(line) for line in fh if line.strip()]
    named = []
    for path in args.logs:
        rows = read_log(path)
        named.append((Path(path).stem, compute_metrics(rows, latencies=latencies)))
    _write_or_stdout(metrics_to_csv(named), args.out)
    for name, m in named:
        sys.stderr.write(canonical_json_line({"run": name, **m.summary()}))
    return EXIT_OK


def _cmd_gen_trace(args) -> int:
    from .scenarios import generate
    from .traces import trace_to_text

    frames = generate(
        args.scenario,
        dt=args.dt,
        ticks=args.ticks,
        hold=args.hold,
        displacement=args.displacement,
        seed=args.seed,
    )
    _write_or_stdout(trace_to_text(frames), args.out)
    print(f"{args.scenario}: {len(frames)} frames", file=sys.stderr)
    return EXIT_OK


def _cmd_record_ref(args) -> int:
    from .coordination import ReferenceEntry, load_library, save_library
    from .kinematics import load_chain
    from .session import read_log

    config = _load(args.config)
    library_path = Path(args.library) if args.library else config.reference_library
    library = load_library(library_path)
    if args.from_log:
        rows = read_log(args.from_log)
        if not rows:
            raise TraceFormatError("log is empty")
        tick = args.tick if args.tick is not None else len(rows) - 1
        if not (0 <= tick < len(rows)):
            raise TraceFormatError(f"tick {tick} outside log of {len(rows)} rows")
        import numpy as np

        left = np.asarray(rows[tick]["left"]["cmd"])
        right = np.asarray(rows[tick]["right"]["cmd"])
    else:
        left = load_chain(config.left_chain).home
        right = load_chain(config.right_chain).home
    library.add(ReferenceEntry(label=args.label, left=left, right=right))
    save_library(library, library_path)
    print(f"recorded '{args.label}' as entry {len(library) - 1} in {library_path}", file=sys.stderr)
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .gateway import serve
    from .session import Session

    config = _load(args.config)
    session = Session(config)
    host = args.host or config.gateway.host
    port = args.port if args.port is not None else config.gateway.port
    static = Path(args.static) if args.static else None
    print(f"serving on ws://{host}:{port}/ws", file=sys.stderr)
    serve(session, host, port, static_dir=static)
    return EXIT_OK


def _cmd_export_fk_fixtures(args) -> int:
    from .gateway import fk_fixtures
    from .kinematics import load_chain

    config = _load(args.config)
    chains = {"left": load_chain(config.left_chain), "right": load_chain(config.right_chain)}
    fixtures = fk_fixtures(chains, count=args.count, seed=args.seed)
    _write_or_stdout(json.dumps(fixtures, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="bimanual-teleop", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("replay", help="re-run a trace headlessly, deterministically")
    p.add_argument("trace")
    p.add_argument("--config")
    p.add_argument("--out", default="-")
    p.add_argument("--latency-out", help="sidecar file for wall-clock per-tick latencies")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("metrics", help="grade one or more session logs to CSV")
    p.add_argument("logs", nargs="+")
    p.add_argument("--out", default="-")
    p.add_argument("--latencies", help="latency sidecar written by replay --latency-out")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("gen-trace", help="generate a synthetic trace")
    from .scenarios import SCENARIOS

    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--out", default="-")
    p.add_argument("--ticks", type=int, default=250)
    p.add_argument("--hold", type=int, default=250)
    p.add_argument("--dt", type=float, default=0.004)
    p.add_argument("--displacement", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_trace)

    p = sub.add_parser("record-ref", help="append a reference pose to a library file")
    p.add_argument("--config")
    p.add_argument("--label", required=True)
    p.add_argument("--library", help="override the config's library path")
    p.add_argument("--from-log", help="capture from a replayed log instead of the home pose")
    p.add_argument("--tick", type=int, help="log row to capture (default: last)")
    p.set_defaults(func=_cmd_record_ref)

    p = sub.add_parser("serve", help="run the websocket gateway")
    p.add_argument("--config")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--static", help="cockpit build directory to host at /ui")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("export-fk-fixtures", help="write FK conformance vectors as JSON")
    p.add_argument("--config")
    p.add_argument("--out", default="-")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--seed", type=int, default=2024)
    p.set_defaults(func=_cmd_export_fk_fixtures)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TraceFormatError as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_TRACE
    except PortInUse as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TeleopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
