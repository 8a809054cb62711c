/** 3D math kernel: vectors, row-major 3x3 matrices, (w,x,y,z) quaternions.
 *
 * Conventions match the gateway's kinematics: quaternions are unit with
 * w >= 0 when canonicalized, roll-pitch-yaw composes as Rz(yaw) Ry(pitch)
 * Rx(roll), and rotation exponentials use Rodrigues' formula.
 */

export type Vec3 = [number, number, number];
/** w, x, y, z */
export type Quat = [number, number, number, number];
/** Row-major, 9 entries. */
export type Mat3 = number[];

export const MAT3_IDENTITY: Mat3 = [1, 0, 0, 0, 1, 0, 0, 0, 1];
export const QUAT_IDENTITY: Quat = [1, 0, 0, 0];

export function vadd(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function vsub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function vscale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

export function vdot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export function vcross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

export function vnorm(a: Vec3): number {
  return Math.hypot(a[0], a[1], a[2]);
}

export function vlerp(a: Vec3, b: Vec3, alpha: number): Vec3 {
  return [
    a[0] + (b[0] - a[0]) * alpha,
    a[1] + (b[1] - a[1]) * alpha,
    a[2] + (b[2] - a[2]) * alpha,
  ];
}

export function matMul(a: Mat3, b: Mat3): Mat3 {
  const out = new Array<number>(9);
  for (let i = 0; i < 3; i++) {
    for (let j = 0; j < 3; j++) {
      out[3 * i + j] =
        a[3 * i] * b[j] + a[3 * i + 1] * b[3 + j] + a[3 * i + 2] * b[6 + j];
    }
  }
  return out;
}

export function matVec(m: Mat3, v: Vec3): Vec3 {
  return [
    m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
    m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
    m[6] * v[0] + m[7] * v[1] + m[8] * v[2],
  ];
}

export function matTranspose(m: Mat3): Mat3 {
  return [m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]];
}

/** Rotation matrix for the axis-angle vector omega (axis * angle). */
export function rotationExp(omega: Vec3): Mat3 {
  const theta = vnorm(omega);
  if (theta < 1e-12) {
    return [1, -omega[2], omega[1], omega[2], 1, -omega[0], -omega[1], omega[0], 1];
  }
  const [x, y, z] = vscale(omega, 1 / theta);
  const c = Math.cos(theta);
  const s = Math.sin(theta);
  const t = 1 - c;
  return [
    c + x * x * t, x * y * t - z * s, x * z * t + y * s,
    y * x * t + z * s, c + y * y * t, y * z * t - x * s,
    z * x * t - y * s, z * y * t + x * s, c + z * z * t,
  ];
}

/** Rz(yaw) Ry(pitch) Rx(roll). */
export function rpyToMat(roll: number, pitch: number, yaw: number): Mat3 {
  const cr = Math.cos(roll), sr = Math.sin(roll);
  const cp = Math.cos(pitch), sp = Math.sin(pitch);
  const cy = Math.cos(yaw), sy = Math.sin(yaw);
  return [
    cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
    sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
    -sp, cp * sr, cp * cr,
  ];
}

/** Unit quaternion (w, x, y, z) with w >= 0, via Shepperd's method. */
export function matToQuat(r: Mat3): Quat {
  const tr = r[0] + r[4] + r[8];
  let q: Quat;
  if (tr > 0) {
    const s = Math.sqrt(tr + 1.0) * 2.0;
    q = [0.25 * s, (r[7] - r[5]) / s, (r[2] - r[6]) / s, (r[3] - r[1]) / s];
  } else if (r[0] > r[4] && r[0] > r[8]) {
    const s = Math.sqrt(1.0 + r[0] - r[4] - r[8]) * 2.0;
    q = [(r[7] - r[5]) / s, 0.25 * s, (r[1] + r[3]) / s, (r[2] + r[6]) / s];
  } else if (r[4] > r[8]) {
    const s = Math.sqrt(1.0 + r[4] - r[0] - r[8]) * 2.0;
    q = [(r[2] - r[6]) / s, (r[1] + r[3]) / s, 0.25 * s, (r[5] + r[7]) / s];
  } else {
    const s = Math.sqrt(1.0 + r[8] - r[0] - r[4]) * 2.0;
    q = [(r[3] - r[1]) / s, (r[2] + r[6]) / s, (r[5] + r[7]) / s, 0.25 * s];
  }
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  let out: Quat = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
  if (out[0] < 0) {
    out = [-out[0], -out[1], -out[2], -out[3]];
  }
  return out;
}

export function quatToMat(q: Quat): Mat3 {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  if (!(n > 1e-12)) {
    throw new Error("quaternion has near-zero norm");
  }
  const w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  return [
    1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
    2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
    2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
  ];
}

/** Hamilton product a * b, both (w, x, y, z). */
export function quatMul(a: Quat, b: Quat): Quat {
  return [
    a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
    a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
    a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
    a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
  ];
}

export function quatNormalize(q: Quat): Quat {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  if (!(n > 1e-12)) {
    throw new Error("quaternion has near-zero norm");
  }
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

export function axisAngleQuat(axis: Vec3, angle: number): Quat {
  const n = vnorm(axis);
  if (!(n > 1e-12)) {
    return [1, 0, 0, 0];
  }
  const half = angle / 2;
  const s = Math.sin(half) / n;
  return [Math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s];
}

/** Normalized linear interpolation along the shorter arc; fine for display. */
export function quatNlerp(a: Quat, b: Quat, alpha: number): Quat {
  const dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
  const sign = dot < 0 ? -1 : 1;
  const q: Quat = [
    a[0] + (sign * b[0] - a[0]) * alpha,
    a[1] + (sign * b[1] - a[1]) * alpha,
    a[2] + (sign * b[2] - a[2]) * alpha,
    a[3] + (sign * b[3] - a[3]) * alpha,
  ];
  return quatNormalize(q);
}
