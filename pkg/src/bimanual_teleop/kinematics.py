"""Serial-chain kinematics: FK, Jacobians, gravity torques, joint limits.

A chain is a fixed sequence of revolute joints.  Joint ``i`` contributes
``origin_i * rot(axis_i, q_i)``; an optional tool transform follows the
last joint.  Frames:

* ``geometric_jacobian`` is expressed in the chain base frame, rows
  stacked (angular; linear), linear part taken at the end-effector
  origin.
* ``body_jacobian`` re-expresses both blocks in the end-effector frame,
  matching twists produced by ``geometry.log`` of relative poses.
* Wrenches are (force; torque) 6-vectors in the base frame, applied at
  the end-effector origin.

Chain description files are line-oriented key-value text::

    name left_arm
    home 0 0.45 0 1.05 0 0.55 0

    [joint 1]
    axis 0 0 1
    origin 0 0 0.267 0 0 0      # xyz meters, then rpy radians
    limits -2.967 2.967 2.175   # lower upper max_velocity

    [link 1]
    mass 3.0
    com 0 0 0.051               # in the frame after joint 1

    [tool]
    origin 0 0 0.107 0 0 0

Joints are numbered 1..k contiguously and each requires axis, origin and
limits; each joint requires a matching link section.  ``home`` is
optional (defaults to zero clamped into limits).  ``[tool]`` is optional.
Unknown sections or keys are rejected with the offending line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ChainFileError, DimensionMismatch, NonFiniteInput
from .geometry import Pose, compose, rotation_exp

GRAVITY_DEFAULT = np.array([0.0, 0.0, -9.81])


@dataclass(frozen=True)
class Joint:
    axis: np.ndarray  # unit 3-vector in the parent frame
    origin: Pose  # parent frame -> joint frame at q = 0
    lower: float
    upper: float
    max_velocity: float


@dataclass(frozen=True)
class Link:
    mass: float
    com: np.ndarray  # in the frame after the owning joint's rotation


@dataclass(frozen=True)
class KinematicChain:
    name: str
    joints: tuple[Joint, ...]
    links: tuple[Link, ...]
    tool: Pose
    home: np.ndarray

    @property
    def dof(self) -> int:
        return len(self.joints)

    @property
    def lower_limits(self) -> np.ndarray:
        return np.array([j.lower for j in self.joints])

    @property
    def upper_limits(self) -> np.ndarray:
        return np.array([j.upper for j in self.joints])

    @property
    def velocity_limits(self) -> np.ndarray:
        return np.array([j.max_velocity for j in self.joints])


@dataclass(frozen=True)
class JointVector:
    """A joint-space vector tagged with its owning chain.

    ``kind`` distinguishes absolute positions (radians) from per-tick
    increments; mixing the two is a caller bug this tag makes visible.
    """

    values: np.ndarray
    chain_id: str = ""
    kind: str = "absolute"

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise DimensionMismatch(f"joint vector must be 1-d, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteInput("joint vector contains non-finite values")
        if self.kind not in ("absolute", "increment"):
            raise DimensionMismatch(f"unknown joint vector kind {self.kind!r}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def joint_values(chain: KinematicChain, q) -> np.ndarray:
    """Validate and coerce q (ndarray or JointVector) for this chain."""
    if isinstance(q, JointVector):
        if q.chain_id and q.chain_id != chain.name:
            raise DimensionMismatch(
                f"joint vector belongs to chain {q.chain_id!r}, not {chain.name!r}"
            )
        v = q.values
    else:
        v = np.asarray(q, dtype=np.float64)
    if v.shape != (chain.dof,):
        raise DimensionMismatch(f"chain {chain.name!r} expects {chain.dof} joints, got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput("joint values contain non-finite entries")
    return v


# ------------------------------------------------------------------ kinematics


def joint_frames(chain: KinematicChain, q) -> list[Pose]:
    """Base-frame pose of every joint frame (after its own rotation)."""
    v = joint_values(chain, q)
    frames = []
    r = np.eye(3)
    p = np.zeros(3)
    for i, joint in enumerate(chain.joints):
        p = r @ joint.origin.translation + p
        r = r @ joint.origin.rotation @ rotation_exp(joint.axis * v[i])
        frames.append(Pose._trusted(r, p))
    return frames


def forward_kinematics(chain: KinematicChain, q) -> Pose:
    """End-effector pose in the chain base frame."""
    frames = joint_frames(chain, q)
    tip = frames[-1] if frames else Pose.identity()
    return compose(tip, chain.tool)


def _world_axes(chain: KinematicChain, frames: list[Pose]) -> np.ndarray:
    return np.stack([f.rotation @ j.axis for f, j in zip(frames, chain.joints)])


def geometric_jacobian(chain: KinematicChain, q) -> np.ndarray:
    """Base-frame geometric Jacobian, shape (6, dof), rows (angular; linear)."""
    frames = joint_frames(chain, q)
    p_ee = compose(frames[-1], chain.tool).translation
    axes = _world_axes(chain, frames)
    origins = np.stack([f.translation for f in frames])
    jac = np.empty((6, chain.dof))
    jac[:3] = axes.T
    jac[3:] = np.cross(axes, p_ee - origins).T
    return jac


def body_jacobian(chain: KinematicChain, q) -> np.ndarray:
    """End-effector-frame Jacobian: J_body @ dq approximates log(T^-1 T')."""
    frames = joint_frames(chain, q)
    ee = compose(frames[-1], chain.tool)
    rt = ee.rotation.T
    jac = geometric_jacobian(chain, q)
    out = np.empty_like(jac)
    out[:3] = rt @ jac[:3]
    out[3:] = rt @ jac[3:]
    return out


def gravity_torques(chain: KinematicChain, q, gravity=GRAVITY_DEFAULT) -> np.ndarray:
    """Joint torques balancing gravity: sum over links of J_com^T (m g).

    Equals -dU/dq for the potential U(q) = -sum_i m_i g . p_com_i(q).
    """
    v = joint_values(chain, q)
    g = np.asarray(gravity, dtype=np.float64)
    if g.shape != (3,):
        raise DimensionMismatch(f"gravity must be a 3-vector, got {g.shape}")
    frames = joint_frames(chain, v)
    masses = np.array([link.mass for link in chain.links])
    coms = np.stack(
        [f.rotation @ link.com + f.translation for f, link in zip(frames, chain.links)]
    )
    origins = np.stack([f.translation for f in frames])
    axes = _world_axes(chain, frames)
    # tau_j = axis_j . sum_{i>=j} m_i (c_i - p_j) x g
    #       = axis_j . ((sum_{i>=j} m_i c_i - p_j sum_{i>=j} m_i) x g)
    mass_tail = np.cumsum(masses[::-1])[::-1]
    weighted_tail = np.cumsum((masses[:, None] * coms)[::-1], axis=0)[::-1]
    lever = weighted_tail - mass_tail[:, None] * origins
    return np.einsum("ij,ij->i", axes, np.cross(lever, g))


def wrench_joint_torques(chain: KinematicChain, q, wrench) -> np.ndarray:
    """Joint torques of a base-frame (force; torque) wrench at the tip."""
    w = np.asarray(wrench, dtype=np.float64)
    if w.shape != (6,):
        raise DimensionMismatch(f"wrench must be a 6-vector, got {w.shape}")
    jac = geometric_jacobian(chain, q)
    return jac[3:].T @ w[:3] + jac[:3].T @ w[3:]


def clamp_to_limits(chain: KinematicChain, q) -> tuple[np.ndarray, np.ndarray]:
    """Clamp absolute joint positions into limits; report clipped indices."""
    v = joint_values(chain, q)
    clamped = np.clip(v, chain.lower_limits, chain.upper_limits)
    clipped = np.nonzero(clamped != v)[0]
    return clamped, clipped


# ------------------------------------------------------------------ chain files


def _parse_floats(value: str, count: int, what: str, line_no: int) -> np.ndarray:
    parts = value.split()
    if len(parts) != count:
        raise ChainFileError(f"{what} expects {count} numbers, got {len(parts)}", line_no)
    try:
        arr = np.array([float(p) for p in parts])
    except ValueError as exc:
        raise ChainFileError(f"{what}: {exc}", line_no) from None
    if not np.all(np.isfinite(arr)):
        raise ChainFileError(f"{what} contains non-finite values", line_no)
    return arr


def parse_chain(text: str, source: str = "<string>") -> KinematicChain:
    """Parse a chain description; see the module docstring for the grammar."""
    name = ""
    home_raw: np.ndarray | None = None
    joint_fields: dict[int, dict[str, np.ndarray]] = {}
    link_fields: dict[int, dict[str, np.ndarray]] = {}
    tool_fields: dict[str, np.ndarray] = {}
    section: tuple[str, int] | None = None  # ("joint"|"link"|"tool", index)

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ChainFileError("unterminated section header", line_no)
            header = line[1:-1].strip().split()
            if header[0] == "tool" and len(header) == 1:
                section = ("tool", 0)
                continue
            if len(header) != 2 or header[0] not in ("joint", "link"):
                raise ChainFileError(f"unknown section [{' '.join(header)}]", line_no)
            try:
                idx = int(header[1])
            except ValueError:
                raise ChainFileError(f"bad section index {header[1]!r}", line_no) from None
            if idx < 1:
                raise ChainFileError("section indices start at 1", line_no)
            table = joint_fields if header[0] == "joint" else link_fields
            if idx in table:
                raise ChainFileError(f"duplicate section [{header[0]} {idx}]", line_no)
            table[idx] = {}
            section = (header[0], idx)
            continue

        key, _, value = line.partition(" ")
        value = value.strip()
        if not value:
            raise ChainFileError(f"key {key!r} has no value", line_no)
        if section is None:
            if key == "name":
                name = value
            elif key == "home":
                parts = value.split()
                home_raw = _parse_floats(value, len(parts), "home", line_no)
            else:
                raise ChainFileError(f"unknown top-level key {key!r}", line_no)
            continue

        kind, idx = section
        if kind == "joint":
            if key not in ("axis", "origin", "limits"):
                raise ChainFileError(f"unknown joint key {key!r}", line_no)
            if key in joint_fields[idx]:
                raise ChainFileError(f"duplicate joint key {key!r}", line_no)
            count = {"axis": 3, "origin": 6, "limits": 3}[key]
            joint_fields[idx][key] = _parse_floats(value, count, key, line_no)
        elif kind == "link":
            if key not in ("mass", "com"):
                raise ChainFileError(f"unknown link key {key!r}", line_no)
            if key in link_fields[idx]:
                raise ChainFileError(f"duplicate link key {key!r}", line_no)
            count = {"mass": 1, "com": 3}[key]
            link_fields[idx][key] = _parse_floats(value, count, key, line_no)
        else:
            if key != "origin":
                raise ChainFileError(f"unknown tool key {key!r}", line_no)
            if key in tool_fields:
                raise ChainFileError("duplicate tool origin", line_no)
            tool_fields[key] = _parse_floats(value, 6, "origin", line_no)

    if not joint_fields:
        raise ChainFileError(f"{source}: chain has no joints")
    dof = max(joint_fields)
    if sorted(joint_fields) != list(range(1, dof + 1)):
        raise ChainFileError(f"{source}: joints must be numbered 1..{dof} contiguously")
    if sorted(link_fields) != list(range(1, dof + 1)):
        raise ChainFileError(f"{source}: every joint needs a matching [link N] section")

    joints = []
    links = []
    for i in range(1, dof + 1):
        jf = joint_fields[i]
        for req in ("axis", "origin", "limits"):
            if req not in jf:
                raise ChainFileError(f"{source}: [joint {i}] is missing {req!r}")
        axis = jf["axis"]
        norm = float(np.linalg.norm(axis))
        if abs(norm - 1.0) > 1e-6:
            raise ChainFileError(f"{source}: [joint {i}] axis must be a unit vector")
        lower, upper, vmax = jf["limits"]
        if not lower < upper:
            raise ChainFileError(f"{source}: [joint {i}] requires lower < upper limit")
        if vmax <= 0:
            raise ChainFileError(f"{source}: [joint {i}] max_velocity must be positive")
        joints.append(
            Joint(
                axis=axis / norm,
                origin=Pose.from_xyz_rpy(jf["origin"][:3], jf["origin"][3:]),
                lower=float(lower),
                upper=float(upper),
                max_velocity=float(vmax),
            )
        )
        lf = link_fields[i]
        for req in ("mass", "com"):
            if req not in lf:
                raise ChainFileError(f"{source}: [link {i}] is missing {req!r}")
        mass = float(lf["mass"][0])
        if mass < 0:
            raise ChainFileError(f"{source}: [link {i}] mass must be non-negative")
        links.append(Link(mass=mass, com=lf["com"]))

    tool = Pose.identity()
    if "origin" in tool_fields:
        tool = Pose.from_xyz_rpy(tool_fields["origin"][:3], tool_fields["origin"][3:])

    lowers = np.array([j.lower for j in joints])
    uppers = np.array([j.upper for j in joints])
    if home_raw is None:
        home = np.clip(np.zeros(dof), lowers, uppers)
    else:
        if home_raw.shape != (dof,):
            raise ChainFileError(f"{source}: home expects {dof} values, got {home_raw.shape[0]}")
        if np.any(home_raw < lowers) or np.any(home_raw > uppers):
            raise ChainFileError(f"{source}: home lies outside joint limits")
        home = home_raw

    return KinematicChain(
        name=name or source,
        joints=tuple(joints),
        links=tuple(links),
        tool=tool,
        home=home,
    )


def load_chain(path) -> KinematicChain:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    import os

    return parse_chain(text, source=os.path.basename(str(path)))
