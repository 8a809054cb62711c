"""Rigid-body poses and twists on SE(3).

Conventions, fixed across the whole stack:

* ``Pose`` stores an explicit 3x3 rotation matrix plus a 3-vector
  translation.  Quaternions appear only at wire and file boundaries and
  are converted through the helpers at the bottom of this module.
* ``Twist`` stacks as (angular; linear).  Every 6-vector in the stack
  (Jacobian rows, Cartesian errors) uses the same ordering.
* ``log`` refuses rotations within ``NEAR_PI_MARGIN`` of pi, where the
  axis is numerically unobservable, instead of guessing.
* Closed forms switch to second-order Taylor expansions below
  ``SMALL_ANGLE`` radians.
* Re-orthonormalization policy: compose never silently repairs its
  inputs.  Drift under realistic chain lengths (<= 1e6 composes) stays
  well below 1e-9; callers that accumulate longer products can call
  ``orthonormalize`` explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NearPiRotation, NonFiniteInput

SMALL_ANGLE = 1e-8
NEAR_PI_MARGIN = 1e-6

# Construction guard: catches transposed or garbage matrices without
# rejecting the tiny drift honest float arithmetic accumulates.
_ORTHO_GUARD = 1e-6


def _as_vec3(v, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise DimensionMismatch(f"{name} must have shape (3,), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteInput(f"{name} contains non-finite values")
    return a


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def _unskew(m: np.ndarray) -> np.ndarray:
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


@dataclass(frozen=True)
class Pose:
    """An element of SE(3): rotation matrix plus translation vector."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64)
        t = np.array(self.translation, dtype=np.float64)
        if r.shape != (3, 3):
            raise DimensionMismatch(f"rotation must be 3x3, got {r.shape}")
        if t.shape != (3,):
            raise DimensionMismatch(f"translation must be a 3-vector, got {t.shape}")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise NonFiniteInput("pose contains non-finite values")
        if np.max(np.abs(r @ r.T - np.eye(3))) > _ORTHO_GUARD:
            raise NonFiniteInput("rotation is not orthonormal")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def _trusted(rotation: np.ndarray, translation: np.ndarray) -> "Pose":
        """Build without validation. Only for products of already-valid
        poses (compose, inverse, chain FK), where orthonormality is
        preserved by the arithmetic; arbitrary input must go through the
        normal constructor."""
        p = object.__new__(Pose)
        rotation.flags.writeable = False
        translation.flags.writeable = False
        object.__setattr__(p, "rotation", rotation)
        object.__setattr__(p, "translation", translation)
        return p

    @staticmethod
    def from_xyz_rpy(xyz, rpy) -> "Pose":
        """Pose from translation and roll-pitch-yaw (Rz(yaw)Ry(pitch)Rx(roll))."""
        xyz = _as_vec3(xyz, "xyz")
        rpy = _as_vec3(rpy, "rpy")
        cr, sr = np.cos(rpy[0]), np.sin(rpy[0])
        cp, sp = np.cos(rpy[1]), np.sin(rpy[1])
        cy, sy = np.cos(rpy[2]), np.sin(rpy[2])
        rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
        ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
        rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
        return Pose(rz @ ry @ rx, xyz)

    @staticmethod
    def from_matrix(m) -> "Pose":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (4, 4):
            raise DimensionMismatch(f"homogeneous matrix must be 4x4, got {m.shape}")
        return Pose(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, point) -> np.ndarray:
        return self.rotation @ _as_vec3(point, "point") + self.translation

    def orthonormalize(self) -> "Pose":
        u, _, vt = np.linalg.svd(self.rotation)
        r = u @ vt
        if np.linalg.det(r) < 0:
            u[:, -1] = -u[:, -1]
            r = u @ vt
        return Pose(r, self.translation)


@dataclass(frozen=True)
class Twist:
    """An element of se(3), stacked as (angular; linear)."""

    angular: np.ndarray
    linear: np.ndarray

    def __post_init__(self):
        a = np.array(self.angular, dtype=np.float64)
        l = np.array(self.linear, dtype=np.float64)
        if a.shape != (3,) or l.shape != (3,):
            raise DimensionMismatch("twist components must be 3-vectors")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(l))):
            raise NonFiniteInput("twist contains non-finite values")
        a.flags.writeable = False
        l.flags.writeable = False
        object.__setattr__(self, "angular", a)
        object.__setattr__(self, "linear", l)

    @staticmethod
    def from_vector(v) -> "Twist":
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (6,):
            raise DimensionMismatch(f"twist vector must have shape (6,), got {v.shape}")
        return Twist(v[:3], v[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.angular, self.linear])


def compose(a: Pose, b: Pose) -> Pose:
    """Group product a*b: apply b first, then a."""
    return Pose._trusted(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def inverse(a: Pose) -> Pose:
    rt = np.ascontiguousarray(a.rotation.T)
    return Pose._trusted(rt, -rt @ a.translation)


def _rot_coefficients(theta: float) -> tuple[float, float, float]:
    """(sin t/t, (1-cos t)/t^2, (t-sin t)/t^3) with small-angle fallbacks."""
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0
    half = 0.5 * theta
    sin_half_over = np.sin(half) / half
    a = np.sin(theta) / theta
    b = 0.5 * sin_half_over * sin_half_over
    c = (theta - np.sin(theta)) / theta**3
    return a, b, c


def rotation_exp(omega) -> np.ndarray:
    """Rodrigues formula: rotation matrix for an axis-angle 3-vector."""
    omega = _as_vec3(omega, "omega")
    theta = float(np.linalg.norm(omega))
    a, b, _ = _rot_coefficients(theta)
    k = _skew(omega)
    return np.eye(3) + a * k + b * (k @ k)


def rotation_log(r: np.ndarray) -> np.ndarray:
    """Axis-angle 3-vector of a rotation matrix.

    Raises NearPiRotation once the angle reaches pi - NEAR_PI_MARGIN; the
    antisymmetric part vanishes there and the axis sign is unrecoverable.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3):
        raise DimensionMismatch(f"rotation must be 3x3, got {r.shape}")
    skew_part = _unskew(r - r.T) / 2.0  # sin(theta) * axis
    sin_norm = float(np.linalg.norm(skew_part))
    cos_val = (float(np.trace(r)) - 1.0) / 2.0
    theta = float(np.arctan2(sin_norm, cos_val))
    if theta >= np.pi - NEAR_PI_MARGIN:
        raise NearPiRotation(f"rotation angle {theta:.9f} is within {NEAR_PI_MARGIN} of pi")
    if theta < SMALL_ANGLE:
        return (1.0 + theta * theta / 6.0) * skew_part
    return (theta / sin_norm) * skew_part


def _v_matrix(omega: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(omega))
    _, b, c = _rot_coefficients(theta)
    k = _skew(omega)
    return np.eye(3) + b * k + c * (k @ k)


def _v_matrix_inv(omega: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(omega))
    k = _skew(omega)
    if theta < SMALL_ANGLE:
        c2 = 1.0 / 12.0 + theta * theta / 720.0
    else:
        half = 0.5 * theta
        c2 = (1.0 - half / np.tan(half)) / (theta * theta)
    return np.eye(3) - 0.5 * k + c2 * (k @ k)


def exp(twist: Twist) -> Pose:
    """Exponential map se(3) -> SE(3)."""
    return Pose(rotation_exp(twist.angular), _v_matrix(twist.angular) @ twist.linear)


def log(pose: Pose) -> Twist:
    """Logarithm map SE(3) -> se(3); exact inverse of exp away from pi."""
    omega = rotation_log(pose.rotation)
    rho = _v_matrix_inv(omega) @ pose.translation
    return Twist(omega, rho)


def rotation_distance(ra: np.ndarray, rb: np.ndarray) -> float:
    """Geodesic angle between two rotations, in radians (always in [0, pi])."""
    rel = np.asarray(ra).T @ np.asarray(rb)
    cos_val = (float(np.trace(rel)) - 1.0) / 2.0
    skew_part = _unskew(rel - rel.T) / 2.0
    return float(np.arctan2(float(np.linalg.norm(skew_part)), cos_val))


def rotation_slerp(ra: np.ndarray, rb: np.ndarray, alpha: float) -> np.ndarray:
    """Shortest-arc geodesic interpolation from ra toward rb by fraction alpha."""
    rel = rotation_log(np.asarray(ra).T @ np.asarray(rb))
    return np.asarray(ra) @ rotation_exp(alpha * rel)


def rotation_to_quat(r: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) with w >= 0 for a rotation matrix."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3):
        raise DimensionMismatch(f"rotation must be 3x3, got {r.shape}")
    # Shepperd's method: pick the largest diagonal combination for stability.
    tr = np.trace(r)
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        )
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array(
            [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
        )
    elif r[1, 1] > r[2, 2]:
        s = np.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array(
            [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array(
            [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s]
        )
    q = q / np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return q


def quat_to_rotation(q) -> np.ndarray:
    """Rotation matrix for a (w, x, y, z) quaternion; normalizes its input."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,):
        raise DimensionMismatch(f"quaternion must have shape (4,), got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise NonFiniteInput("quaternion contains non-finite values")
    n = float(np.linalg.norm(q))
    if n < 1e-12:
        raise NonFiniteInput("quaternion has near-zero norm")
    w, x, y, z = q / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
