/** Kinematic chain files and client-side forward kinematics.
 *
 * The cockpit fetches the same chain description text the server loads
 * (GET /chain/{side}) and re-implements FK locally so every render frame
 * can pose the arms without a network round trip. Conformance with the
 * server implementation is pinned by the /fk-fixtures vectors.
 *
 * Grammar (line oriented, # comments): top-level `name` and optional
 * `home`; then [joint N] sections with `axis` (unit 3-vector), `origin`
 * (xyz meters + rpy radians, Rz Ry Rx), `limits` (lower upper
 * max_velocity); a matching [link N] with `mass`/`com` per joint; an
 * optional [tool] with `origin`. Joints number 1..k contiguously.
 */

import {
  Mat3,
  MAT3_IDENTITY,
  Vec3,
  matMul,
  matVec,
  rotationExp,
  rpyToMat,
  vadd,
  vnorm,
  vscale,
} from "./math.js";

export interface ChainJoint {
  axis: Vec3;
  originR: Mat3;
  originT: Vec3;
  lower: number;
  upper: number;
  maxVelocity: number;
}

export interface ChainLink {
  mass: number;
  com: Vec3;
}

export interface Chain {
  name: string;
  joints: ChainJoint[];
  links: ChainLink[];
  toolR: Mat3;
  toolT: Vec3;
  home: number[];
}

export interface Frame {
  r: Mat3;
  t: Vec3;
}

export class ChainFileError extends Error {
  constructor(message: string, readonly line?: number) {
    super(line === undefined ? message : `line ${line}: ${message}`);
    this.name = "ChainFileError";
  }
}

function parseFloats(value: string, count: number, what: string, lineNo: number): number[] {
  const parts = value.split(/\s+/).filter((p) => p.length > 0);
  if (parts.length !== count) {
    throw new ChainFileError(`${what} expects ${count} numbers, got ${parts.length}`, lineNo);
  }
  const out = parts.map(Number);
  if (out.some((v) => !Number.isFinite(v))) {
    throw new ChainFileError(`${what} contains non-finite or unparseable values`, lineNo);
  }
  return out;
}

export function parseChain(text: string, source = "<string>"): Chain {
  let name = "";
  let homeRaw: number[] | null = null;
  const jointFields = new Map<number, Map<string, number[]>>();
  const linkFields = new Map<number, Map<string, number[]>>();
  const toolFields = new Map<string, number[]>();
  let section: ["joint" | "link" | "tool", number] | null = null;

  const lines = text.split(/\r?\n/);
  for (let i = 0; i < lines.length; i++) {
    const lineNo = i + 1;
    const line = lines[i].split("#", 1)[0].trim();
    if (!line) {
      continue;
    }
    if (line.startsWith("[")) {
      if (!line.endsWith("]")) {
        throw new ChainFileError("unterminated section header", lineNo);
      }
      const header = line.slice(1, -1).trim().split(/\s+/);
      if (header[0] === "tool" && header.length === 1) {
        section = ["tool", 0];
        continue;
      }
      if (header.length !== 2 || (header[0] !== "joint" && header[0] !== "link")) {
        throw new ChainFileError(`unknown section [${header.join(" ")}]`, lineNo);
      }
      const idx = Number(header[1]);
      if (!Number.isInteger(idx)) {
        throw new ChainFileError(`bad section index '${header[1]}'`, lineNo);
      }
      if (idx < 1) {
        throw new ChainFileError("section indices start at 1", lineNo);
      }
      const table = header[0] === "joint" ? jointFields : linkFields;
      if (table.has(idx)) {
        throw new ChainFileError(`duplicate section [${header[0]} ${idx}]`, lineNo);
      }
      table.set(idx, new Map());
      section = [header[0], idx];
      continue;
    }

    const space = line.indexOf(" ");
    const key = space < 0 ? line : line.slice(0, space);
    const value = space < 0 ? "" : line.slice(space + 1).trim();
    if (!value) {
      throw new ChainFileError(`key '${key}' has no value`, lineNo);
    }
    if (section === null) {
      if (key === "name") {
        name = value;
      } else if (key === "home") {
        const parts = value.split(/\s+/).filter((p) => p.length > 0);
        homeRaw = parseFloats(value, parts.length, "home", lineNo);
      } else {
        throw new ChainFileError(`unknown top-level key '${key}'`, lineNo);
      }
      continue;
    }

    const [kind, idx] = section;
    if (kind === "joint") {
      if (key !== "axis" && key !== "origin" && key !== "limits") {
        throw new ChainFileError(`unknown joint key '${key}'`, lineNo);
      }
      const fields = jointFields.get(idx)!;
      if (fields.has(key)) {
        throw new ChainFileError(`duplicate joint key '${key}'`, lineNo);
      }
      const count = key === "axis" ? 3 : key === "origin" ? 6 : 3;
      fields.set(key, parseFloats(value, count, key, lineNo));
    } else if (kind === "link") {
      if (key !== "mass" && key !== "com") {
        throw new ChainFileError(`unknown link key '${key}'`, lineNo);
      }
      const fields = linkFields.get(idx)!;
      if (fields.has(key)) {
        throw new ChainFileError(`duplicate link key '${key}'`, lineNo);
      }
      fields.set(key, parseFloats(value, key === "mass" ? 1 : 3, key, lineNo));
    } else {
      if (key !== "origin") {
        throw new ChainFileError(`unknown tool key '${key}'`, lineNo);
      }
      if (toolFields.has(key)) {
        throw new ChainFileError("duplicate tool origin", lineNo);
      }
      toolFields.set(key, parseFloats(value, 6, "origin", lineNo));
    }
  }

  if (jointFields.size === 0) {
    throw new ChainFileError(`${source}: chain has no joints`);
  }
  const dof = Math.max(...jointFields.keys());
  const expected = Array.from({ length: dof }, (_, i) => i + 1);
  const jointIdx = Array.from(jointFields.keys()).sort((a, b) => a - b);
  if (jointIdx.length !== dof || jointIdx.some((v, i) => v !== expected[i])) {
    throw new ChainFileError(`${source}: joints must be numbered 1..${dof} contiguously`);
  }
  const linkIdx = Array.from(linkFields.keys()).sort((a, b) => a - b);
  if (linkIdx.length !== dof || linkIdx.some((v, i) => v !== expected[i])) {
    throw new ChainFileError(`${source}: every joint needs a matching [link N] section`);
  }

  const joints: ChainJoint[] = [];
  const links: ChainLink[] = [];
  for (let i = 1; i <= dof; i++) {
    const jf = jointFields.get(i)!;
    for (const req of ["axis", "origin", "limits"]) {
      if (!jf.has(req)) {
        throw new ChainFileError(`${source}: [joint ${i}] is missing '${req}'`);
      }
    }
    const axisRaw = jf.get("axis")! as Vec3;
    const norm = vnorm(axisRaw);
    if (Math.abs(norm - 1.0) > 1e-6) {
      throw new ChainFileError(`${source}: [joint ${i}] axis must be a unit vector`);
    }
    const origin = jf.get("origin")!;
    const [lower, upper, vmax] = jf.get("limits")!;
    if (!(lower < upper)) {
      throw new ChainFileError(`${source}: [joint ${i}] requires lower < upper limit`);
    }
    if (!(vmax > 0)) {
      throw new ChainFileError(`${source}: [joint ${i}] max_velocity must be positive`);
    }
    joints.push({
      axis: vscale(axisRaw, 1 / norm),
      originR: rpyToMat(origin[3], origin[4], origin[5]),
      originT: [origin[0], origin[1], origin[2]],
      lower,
      upper,
      maxVelocity: vmax,
    });
    const lf = linkFields.get(i)!;
    for (const req of ["mass", "com"]) {
      if (!lf.has(req)) {
        throw new ChainFileError(`${source}: [link ${i}] is missing '${req}'`);
      }
    }
    const mass = lf.get("mass")![0];
    if (mass < 0) {
      throw new ChainFileError(`${source}: [link ${i}] mass must be non-negative`);
    }
    links.push({ mass, com: lf.get("com")! as Vec3 });
  }

  let toolR: Mat3 = MAT3_IDENTITY;
  let toolT: Vec3 = [0, 0, 0];
  const toolOrigin = toolFields.get("origin");
  if (toolOrigin) {
    toolR = rpyToMat(toolOrigin[3], toolOrigin[4], toolOrigin[5]);
    toolT = [toolOrigin[0], toolOrigin[1], toolOrigin[2]];
  }

  let home: number[];
  if (homeRaw === null) {
    home = joints.map((j) => Math.min(Math.max(0, j.lower), j.upper));
  } else {
    if (homeRaw.length !== dof) {
      throw new ChainFileError(`${source}: home expects ${dof} values, got ${homeRaw.length}`);
    }
    if (homeRaw.some((v, i) => v < joints[i].lower || v > joints[i].upper)) {
      throw new ChainFileError(`${source}: home lies outside joint limits`);
    }
    home = homeRaw;
  }

  return { name: name || source, joints, links, toolR, toolT, home };
}

function checkQ(chain: Chain, q: number[]): void {
  if (q.length !== chain.joints.length) {
    throw new Error(`chain '${chain.name}' expects ${chain.joints.length} joints, got ${q.length}`);
  }
  if (q.some((v) => !Number.isFinite(v))) {
    throw new Error("joint values contain non-finite entries");
  }
}

/** Base-frame pose of every joint frame, after its own rotation. */
export function jointFrames(chain: Chain, q: number[]): Frame[] {
  checkQ(chain, q);
  const frames: Frame[] = [];
  let r: Mat3 = MAT3_IDENTITY;
  let t: Vec3 = [0, 0, 0];
  for (let i = 0; i < chain.joints.length; i++) {
    const joint = chain.joints[i];
    t = vadd(matVec(r, joint.originT), t);
    r = matMul(matMul(r, joint.originR), rotationExp(vscale(joint.axis, q[i])));
    frames.push({ r, t });
  }
  return frames;
}

/** End-effector pose in the chain base frame, tool transform included. */
export function forwardKinematics(chain: Chain, q: number[]): Frame {
  const frames = jointFrames(chain, q);
  const tip = frames[frames.length - 1];
  return {
    r: matMul(tip.r, chain.toolR),
    t: vadd(matVec(tip.r, chain.toolT), tip.t),
  };
}

/** Polyline through base, every joint origin, and the tool tip; for drawing. */
export function linkPoints(chain: Chain, q: number[]): Vec3[] {
  const frames = jointFrames(chain, q);
  const pts: Vec3[] = [[0, 0, 0]];
  for (const f of frames) {
    pts.push(f.t);
  }
  const tip = frames[frames.length - 1];
  pts.push(vadd(matVec(tip.r, chain.toolT), tip.t));
  return pts;
}

export interface ReferenceEntry {
  label: string;
  left: number[];
  right: number[];
}

/** Parse the reference library text served at /reference-library:
 * label line, then a left and a right joint row, repeated; # comments. */
export function parseReferenceLibrary(text: string, dof?: number): ReferenceEntry[] {
  const content: string[] = [];
  for (const raw of text.split(/\r?\n/)) {
    const line = raw.trim();
    if (!line || line.startsWith("#")) {
      continue;
    }
    content.push(line);
  }
  if (content.length % 3 !== 0) {
    throw new Error(`expected label/left/right line triples, got ${content.length} content lines`);
  }
  const entries: ReferenceEntry[] = [];
  for (let i = 0; i < content.length; i += 3) {
    const label = content[i];
    const rows = [content[i + 1], content[i + 2]].map((row) => {
      const values = row.split(/\s+/).map(Number);
      if (values.some((v) => !Number.isFinite(v))) {
        throw new Error(`entry '${label}' has a non-numeric joint row`);
      }
      if (dof !== undefined && values.length !== dof) {
        throw new Error(`entry '${label}' expects ${dof} joints, got ${values.length}`);
      }
      return values;
    });
    entries.push({ label, left: rows[0], right: rows[1] });
  }
  return entries;
}
