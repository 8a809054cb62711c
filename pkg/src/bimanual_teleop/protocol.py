"""Wire protocol: newline-delimited canonical JSON messages, version 1.

Framing is one JSON object per line (LF terminated). Encoding is
canonical: sorted keys, compact separators, shortest float repr, no
NaN/Infinity. Every message carries ``v`` (protocol version) and
``kind``; senders also attach a monotone ``seq`` so receivers can count
gaps (the state stream is latest-wins, so gaps are expected and the
drop counter makes them visible).

Client -> server kinds: ``frame``, ``calibrate``, ``set_mode``,
``inject_wrench``, ``record_ref``, ``clutch``.
Server -> client kinds: ``state``, ``ack``, ``error``.

``decode_line`` only checks structure (valid JSON object with a string
``kind`` and integer version); per-kind payload checking lives in
``validate_command`` so an unknown kind can be answered with an error
reply naming it rather than torn down as a parse failure.
"""

from __future__ import annotations

import json

from .errors import NonFiniteInput, ParseError
from .simulator import SIDES
from .traces import canonical_json_line

PROTOCOL_VERSION = 1

COMMAND_KINDS = ("frame", "calibrate", "set_mode", "inject_wrench", "record_ref", "clutch")
SERVER_KINDS = ("state", "ack", "error")


def encode_message(msg: dict) -> bytes:
    """Canonical bytes for one message. Refuses non-finite numbers: a
    NaN pose must be caught and logged at the source, never shipped."""
    try:
        return canonical_json_line(msg).encode("utf-8")
    except ValueError as exc:
        raise NonFiniteInput(f"message contains non-finite values: {exc}") from None


def decode_line(data: bytes | str) -> dict:
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="strict")
    try:
        msg = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad JSON: {exc.msg}", offset=exc.pos) from None
    if not isinstance(msg, dict):
        raise ParseError("message must be a JSON object", offset=0)
    if msg.get("v") != PROTOCOL_VERSION:
        raise ParseError(f"unsupported protocol version {msg.get('v')!r}", offset=0)
    kind = msg.get("kind")
    if not isinstance(kind, str):
        raise ParseError("message kind must be a string", offset=0)
    return msg


def _require(msg: dict, key: str, types, kind: str):
    if key not in msg:
        raise ParseError(f"{kind} command missing {key!r}", offset=0)
    value = msg[key]
    if not isinstance(value, types):
        raise ParseError(f"{kind} command field {key!r} has wrong type", offset=0)
    return value


def _require_side(msg: dict, kind: str) -> str:
    side = _require(msg, "side", str, kind)
    if side not in SIDES:
        raise ParseError(f"{kind} command side must be one of {SIDES}", offset=0)
    return side


def validate_command(msg: dict) -> dict:
    """Check a decoded client message's payload. Returns the message.

    Raises ParseError for payload problems. Unknown kinds raise too, but
    callers should check ``msg['kind'] in COMMAND_KINDS`` first if they
    want to answer with the offending kind.
    """
    kind = msg["kind"]
    if kind not in COMMAND_KINDS:
        raise ParseError(f"unknown command kind {kind!r}", offset=0)
    if kind == "frame":
        frame = _require(msg, "frame", dict, kind)
        for key in ("t", "side", "pos", "quat"):
            if key not in frame:
                raise ParseError(f"frame record missing {key!r}", offset=0)
    elif kind == "calibrate":
        side = _require(msg, "side", str, kind)
        if side not in SIDES and side != "both":
            raise ParseError("calibrate side must be left, right, or both", offset=0)
    elif kind == "set_mode":
        mode = _require(msg, "frame_mode", str, kind)
        if mode not in ("world", "tool"):
            raise ParseError("set_mode frame_mode must be world or tool", offset=0)
    elif kind == "inject_wrench":
        _require_side(msg, kind)
        wrench = _require(msg, "wrench", list, kind)
        if len(wrench) != 6 or not all(isinstance(x, (int, float)) for x in wrench):
            raise ParseError("inject_wrench wrench must be six numbers", offset=0)
    elif kind == "record_ref":
        label = _require(msg, "label", str, kind)
        if not label.strip():
            raise ParseError("record_ref label must be non-empty", offset=0)
    elif kind == "clutch":
        _require_side(msg, kind)
        _require(msg, "engaged", bool, kind)
    return msg


# -- message builders ---------------------------------------------------


def _floats(values) -> list[float]:
    return [float(v) for v in values]


def state_message(report, seq: int, drops: int) -> dict:
    """StateMessage from a TickReport. Every field present every tick."""
    msg = {
        "v": PROTOCOL_VERSION,
        "kind": "state",
        "seq": seq,
        "tick": report.tick,
        "t": report.timestamp,
        "ref": report.reference_index,
        "drops": drops,
    }
    for side, rep in report.sides.items():
        quat = _pose7(rep.ee)
        msg[side] = {
            "q": _floats(rep.q),
            "ee": quat,
            "gripper": float(rep.gripper),
            "calibrated": rep.calibrated,
            "rejects": rep.rejects,
            "watchdog": {"state": rep.watchdog_state, "trips": rep.watchdog_trips},
            "haptic": {"tau": rep.tau_ext_norm, "vib": rep.vibration},
        }
    return msg


def _pose7(pose) -> list[float]:
    from .geometry import rotation_to_quat

    quat = rotation_to_quat(pose.rotation)
    return _floats([*pose.translation, *quat])


def error_message(seq: int, reason: str, offending_kind: str | None = None) -> dict:
    msg = {"v": PROTOCOL_VERSION, "kind": "error", "seq": seq, "reason": reason}
    if offending_kind is not None:
        msg["of"] = offending_kind
    return msg


def ack_message(seq: int, of_kind: str, **extra) -> dict:
    msg = {"v": PROTOCOL_VERSION, "kind": "ack", "seq": seq, "of": of_kind}
    msg.update(extra)
    return msg


def frame_command(record: dict, seq: int) -> dict:
    return {"v": PROTOCOL_VERSION, "kind": "frame", "seq": seq, "frame": record}
