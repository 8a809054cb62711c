/** Wire protocol, version 1: newline-delimited canonical JSON.
 *
 * Canonical encoding is sorted keys, compact separators, no NaN or
 * Infinity, ASCII-escaped strings. JSON erases the int/float distinction
 * in this language, so fields that are floats on the wire (poses,
 * timestamps, gains) carry a schema hint: integral values under those
 * keys render as "1.0" rather than "1", matching the reference encoder
 * byte for byte. Shortest-digit float printing agrees between the two
 * encoders for magnitudes in [1e-4, 1e16), which covers every protocol
 * quantity; values outside that window may format differently and must
 * not be introduced into golden material.
 */

export const PROTOCOL_VERSION = 1;

export const COMMAND_KINDS = [
  "frame",
  "calibrate",
  "set_mode",
  "inject_wrench",
  "record_ref",
  "clutch",
] as const;

export const SERVER_KINDS = ["state", "ack", "error"] as const;

export type Side = "left" | "right";

export interface FrameRecord {
  t: number;
  side: Side;
  pos: number[];
  quat: number[];
  gripper: number;
  buttons: number;
}

export interface WatchdogReport {
  state: string;
  trips: number;
}

export interface HapticReport {
  tau: number;
  vib: number;
}

export interface SideState {
  q: number[];
  ee: number[];
  gripper: number;
  calibrated: boolean;
  /** Cumulative count of input frames discarded by the server's hygiene
   * filter (implausible velocity, stale timestamp, non-finite values). */
  rejects: number;
  watchdog: WatchdogReport;
  haptic: HapticReport;
}

export interface StateMessage {
  v: number;
  kind: "state";
  seq: number;
  tick: number;
  t: number;
  ref: number;
  drops: number;
  left: SideState;
  right: SideState;
}

export interface AckMessage {
  v: number;
  kind: "ack";
  seq: number;
  of: string;
  [extra: string]: unknown;
}

export interface ErrorMessage {
  v: number;
  kind: "error";
  seq: number;
  reason: string;
  of?: string;
}

export type ServerMessage = StateMessage | AckMessage | ErrorMessage;

export class ProtocolError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ProtocolError";
  }
}

/** Keys whose values (including nested arrays) are floats on the wire. */
const FLOAT_KEYS = new Set(["t", "pos", "quat", "gripper", "wrench", "ee", "q", "tau", "vib"]);

function encodeString(s: string): string {
  let out = '"';
  for (let i = 0; i < s.length; i++) {
    const code = s.charCodeAt(i);
    const ch = s[i];
    if (ch === '"') {
      out += '\\"';
    } else if (ch === "\\") {
      out += "\\\\";
    } else if (ch === "\n") {
      out += "\\n";
    } else if (ch === "\r") {
      out += "\\r";
    } else if (ch === "\t") {
      out += "\\t";
    } else if (ch === "\b") {
      out += "\\b";
    } else if (ch === "\f") {
      out += "\\f";
    } else if (code < 0x20 || code > 0x7e) {
      out += "\\u" + code.toString(16).padStart(4, "0");
    } else {
      out += ch;
    }
  }
  return out + '"';
}

function encodeNumber(v: number, asFloat: boolean): string {
  if (!Number.isFinite(v)) {
    throw new ProtocolError("message contains non-finite values");
  }
  if (asFloat && Number.isInteger(v) && Math.abs(v) < 1e15) {
    return Object.is(v, -0) ? "-0.0" : v.toFixed(1);
  }
  return String(v);
}

function encodeValue(value: unknown, asFloat: boolean): string {
  if (value === null) {
    return "null";
  }
  switch (typeof value) {
    case "boolean":
      return value ? "true" : "false";
    case "number":
      return encodeNumber(value, asFloat);
    case "string":
      return encodeString(value);
    case "object": {
      if (Array.isArray(value)) {
        return "[" + value.map((v) => encodeValue(v, asFloat)).join(",") + "]";
      }
      const obj = value as Record<string, unknown>;
      const keys = Object.keys(obj).sort();
      const parts = keys.map(
        (k) => encodeString(k) + ":" + encodeValue(obj[k], FLOAT_KEYS.has(k)),
      );
      return "{" + parts.join(",") + "}";
    }
    default:
      throw new ProtocolError(`cannot encode value of type ${typeof value}`);
  }
}

/** One canonical message line, LF terminated. */
export function canonicalLine(msg: Record<string, unknown>): string {
  return encodeValue(msg, false) + "\n";
}

/** Parse one line: valid JSON object, supported version, string kind. */
export function decodeLine(data: string): Record<string, unknown> {
  let msg: unknown;
  try {
    msg = JSON.parse(data);
  } catch (exc) {
    throw new ProtocolError(`bad JSON: ${(exc as Error).message}`);
  }
  if (msg === null || typeof msg !== "object" || Array.isArray(msg)) {
    throw new ProtocolError("message must be a JSON object");
  }
  const record = msg as Record<string, unknown>;
  if (record.v !== PROTOCOL_VERSION) {
    throw new ProtocolError(`unsupported protocol version ${JSON.stringify(record.v)}`);
  }
  if (typeof record.kind !== "string") {
    throw new ProtocolError("message kind must be a string");
  }
  return record;
}

export function isState(msg: Record<string, unknown>): msg is Record<string, unknown> & StateMessage {
  return msg.kind === "state";
}

export function isAck(msg: Record<string, unknown>): msg is Record<string, unknown> & AckMessage {
  return msg.kind === "ack";
}

export function isError(msg: Record<string, unknown>): msg is Record<string, unknown> & ErrorMessage {
  return msg.kind === "error";
}

// -- command builders -----------------------------------------------------

export function frameCommand(record: FrameRecord, seq: number): Record<string, unknown> {
  return { v: PROTOCOL_VERSION, kind: "frame", seq, frame: { ...record } };
}

export function calibrateCommand(side: Side | "both", seq: number): Record<string, unknown> {
  return { v: PROTOCOL_VERSION, kind: "calibrate", seq, side };
}

export function setModeCommand(frameMode: "world" | "tool", seq: number): Record<string, unknown> {
  return { v: PROTOCOL_VERSION, kind: "set_mode", seq, frame_mode: frameMode };
}

export function injectWrenchCommand(
  side: Side,
  wrench: number[],
  seq: number,
): Record<string, unknown> {
  if (wrench.length !== 6 || wrench.some((v) => !Number.isFinite(v))) {
    throw new ProtocolError("wrench must be six finite numbers");
  }
  return { v: PROTOCOL_VERSION, kind: "inject_wrench", seq, side, wrench: [...wrench] };
}

export function recordRefCommand(label: string, seq: number): Record<string, unknown> {
  if (!label.trim()) {
    throw new ProtocolError("record_ref label must be non-empty");
  }
  return { v: PROTOCOL_VERSION, kind: "record_ref", seq, label };
}

export function clutchCommand(side: Side, engaged: boolean, seq: number): Record<string, unknown> {
  return { v: PROTOCOL_VERSION, kind: "clutch", seq, side, engaged };
}
