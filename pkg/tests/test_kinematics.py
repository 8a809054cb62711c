"""Kinematics tests.

Oracles: FK is checked against an independent 4x4 homogeneous product
built with scipy.linalg.expm; Jacobians against central finite
differences of that oracle; gravity torques against a central finite
difference of the potential energy.
"""

import numpy as np
import pytest
from scipy.linalg import expm, logm

from bimanual_teleop import kinematics as kin
from bimanual_teleop.assets import chain_path
from bimanual_teleop.errors import ChainFileError, DimensionMismatch, NonFiniteInput
from bimanual_teleop.kinematics import JointVector


# ---------------------------------------------------------------- oracles


def hat(v):
    return np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])


def oracle_joint_mats(chain, q):
    """4x4 pose of every joint frame, composed with plain matrix products."""
    mats = []
    t = np.eye(4)
    for i, joint in enumerate(chain.joints):
        o = np.eye(4)
        o[:3, :3] = joint.origin.rotation
        o[:3, 3] = joint.origin.translation
        r = np.eye(4)
        r[:3, :3] = expm(hat(joint.axis) * q[i])
        t = t @ o @ r
        mats.append(t)
    return mats


def oracle_fk(chain, q):
    t = oracle_joint_mats(chain, q)[-1]
    tool = np.eye(4)
    tool[:3, :3] = chain.tool.rotation
    tool[:3, 3] = chain.tool.translation
    return t @ tool


def oracle_com_positions(chain, q):
    mats = oracle_joint_mats(chain, q)
    return [m[:3, :3] @ link.com + m[:3, 3] for m, link in zip(mats, chain.links)]


def oracle_potential(chain, q, gravity):
    return -sum(
        link.mass * gravity @ p for link, p in zip(chain.links, oracle_com_positions(chain, q))
    )


def fd_geometric_jacobian(chain, q, eps=1e-6):
    jac = np.zeros((6, chain.dof))
    for j in range(chain.dof):
        qp, qm = q.copy(), q.copy()
        qp[j] += eps
        qm[j] -= eps
        tp, tm = oracle_fk(chain, qp), oracle_fk(chain, qm)
        drot = np.real(logm(tp[:3, :3] @ tm[:3, :3].T))
        jac[:3, j] = np.array([drot[2, 1], drot[0, 2], drot[1, 0]]) / (2 * eps)
        jac[3:, j] = (tp[:3, 3] - tm[:3, 3]) / (2 * eps)
    return jac


def fd_body_jacobian(chain, q, eps=1e-6):
    jac = np.zeros((6, chain.dof))
    t0 = oracle_fk(chain, q)
    for j in range(chain.dof):
        qp, qm = q.copy(), q.copy()
        qp[j] += eps
        qm[j] -= eps
        rel = np.linalg.inv(oracle_fk(chain, qm)) @ oracle_fk(chain, qp)
        g = np.real(logm(rel))
        jac[:3, j] = np.array([g[2, 1], g[0, 2], g[1, 0]]) / (2 * eps)
        jac[3:, j] = g[:3, 3] / (2 * eps)
    del t0
    return jac


def random_q(chain, rng):
    lo, hi = chain.lower_limits, chain.upper_limits
    # Stay inside limits; the margin keeps finite differences in range too.
    return rng.uniform(lo + 0.05, hi - 0.05)


@pytest.fixture(scope="module")
def arms():
    return kin.load_chain(chain_path("left")), kin.load_chain(chain_path("right"))


# --------------------------------------------------------------------- FK


def test_fk_matches_matrix_oracle(arms):
    rng = np.random.default_rng(20)
    for chain in arms:
        for _ in range(100):
            q = random_q(chain, rng)
            np.testing.assert_allclose(
                kin.forward_kinematics(chain, q).matrix(), oracle_fk(chain, q), atol=1e-10
            )


def test_fk_single_joint_frozen():
    chain = kin.parse_chain(
        """
name probe
[joint 1]
axis 0 0 1
origin 0 0 0.1 0 0 0
limits -3 3 2
[link 1]
mass 0
com 0 0 0
"""
    )
    p = kin.forward_kinematics(chain, [np.pi / 2])
    c, s = np.cos(np.pi / 2), np.sin(np.pi / 2)
    np.testing.assert_allclose(p.rotation, [[c, -s, 0], [s, c, 0], [0, 0, 1]], atol=1e-15)
    np.testing.assert_allclose(p.translation, [0, 0, 0.1], atol=0.0)


# --------------------------------------------------------------- Jacobians


def test_geometric_jacobian_matches_finite_differences(arms):
    rng = np.random.default_rng(21)
    for chain in arms:
        for _ in range(200):
            q = random_q(chain, rng)
            jac = kin.geometric_jacobian(chain, q)
            ref = fd_geometric_jacobian(chain, q)
            assert np.linalg.norm(jac - ref) / np.linalg.norm(ref) < 1e-4


def test_body_jacobian_matches_log_finite_differences(arms):
    rng = np.random.default_rng(22)
    for chain in arms:
        for _ in range(200):
            q = random_q(chain, rng)
            jac = kin.body_jacobian(chain, q)
            ref = fd_body_jacobian(chain, q)
            assert np.linalg.norm(jac - ref) / np.linalg.norm(ref) < 1e-4


def test_jacobian_single_joint_frozen():
    # z-axis joint at the origin with the tool at (1,0,0): the column is
    # angular (0,0,1), linear z x (1,0,0) = (0,1,0).
    chain = kin.parse_chain(
        """
name probe
[joint 1]
axis 0 0 1
origin 0 0 0 0 0 0
limits -3 3 2
[link 1]
mass 0
com 0 0 0
[tool]
origin 1 0 0 0 0 0
"""
    )
    jac = kin.geometric_jacobian(chain, [0.0])
    np.testing.assert_allclose(jac[:, 0], [0, 0, 1, 0, 1, 0], atol=1e-15)


def test_stretched_configuration_is_singular(arms):
    # All-zero joints put the inline arm fully stretched along z.
    chain = arms[0]
    jac = kin.geometric_jacobian(chain, np.zeros(chain.dof))
    sigma = np.linalg.svd(jac, compute_uv=False)
    assert sigma[5] < 1e-8
    # The shipped home posture is deliberately far from that singularity.
    sigma_home = np.linalg.svd(kin.geometric_jacobian(chain, chain.home), compute_uv=False)
    assert sigma_home[5] > 1e-2


# ----------------------------------------------------------------- gravity


def test_gravity_matches_potential_gradient(arms):
    rng = np.random.default_rng(23)
    gravity = np.array([0.0, 0.0, -9.81])
    eps = 1e-6
    for chain in arms:
        for _ in range(100):
            q = random_q(chain, rng)
            tau = kin.gravity_torques(chain, q, gravity)
            ref = np.zeros(chain.dof)
            for j in range(chain.dof):
                qp, qm = q.copy(), q.copy()
                qp[j] += eps
                qm[j] -= eps
                ref[j] = -(
                    oracle_potential(chain, qp, gravity) - oracle_potential(chain, qm, gravity)
                ) / (2 * eps)
            assert np.linalg.norm(tau - ref) / max(np.linalg.norm(ref), 1e-9) < 1e-6


def test_gravity_pendulum_frozen():
    # Horizontal 2 kg link, com 0.25 m out: 2 * 9.81 * 0.25 = 4.905 N m.
    chain = kin.parse_chain(
        """
name pendulum
[joint 1]
axis 0 1 0
origin 0 0 0 0 0 0
limits -3 3 2
[link 1]
mass 2.0
com 0.25 0 0
"""
    )
    tau = kin.gravity_torques(chain, [0.0], np.array([0.0, 0.0, -9.81]))
    np.testing.assert_allclose(tau, [4.905], atol=1e-12)


def test_gravity_zero_g(arms):
    chain = arms[0]
    tau = kin.gravity_torques(chain, chain.home, np.zeros(3))
    np.testing.assert_allclose(tau, np.zeros(chain.dof), atol=0.0)


def test_wrench_torques_match_jacobian_blocks(arms):
    rng = np.random.default_rng(24)
    chain = arms[0]
    for _ in range(50):
        q = random_q(chain, rng)
        w = rng.uniform(-5, 5, size=6)
        jac = kin.geometric_jacobian(chain, q)
        want = jac[3:].T @ w[:3] + jac[:3].T @ w[3:]
        np.testing.assert_allclose(kin.wrench_joint_torques(chain, q, w), want, atol=1e-12)


# ------------------------------------------------------------------- limits


def test_clamp_to_limits(arms):
    chain = arms[0]
    q = chain.upper_limits + 0.5
    clamped, clipped = kin.clamp_to_limits(chain, q)
    np.testing.assert_allclose(clamped, chain.upper_limits, atol=0.0)
    assert list(clipped) == list(range(chain.dof))
    q2 = chain.home
    clamped2, clipped2 = kin.clamp_to_limits(chain, q2)
    np.testing.assert_allclose(clamped2, q2, atol=0.0)
    assert clipped2.size == 0


def test_joint_vector_tagging(arms):
    chain = arms[0]
    jv = JointVector(chain.home, chain_id=chain.name)
    np.testing.assert_allclose(kin.joint_values(chain, jv), chain.home, atol=0.0)
    with pytest.raises(DimensionMismatch):
        kin.joint_values(chain, JointVector(chain.home, chain_id="other_arm"))
    with pytest.raises(DimensionMismatch):
        kin.joint_values(chain, np.zeros(3))
    with pytest.raises(NonFiniteInput):
        kin.forward_kinematics(chain, np.full(chain.dof, np.nan))
    with pytest.raises(NonFiniteInput):
        JointVector(np.array([np.nan]))
    with pytest.raises(DimensionMismatch):
        JointVector(np.zeros(3), kind="velocity")


# -------------------------------------------------------------- chain files


def test_shipped_chains_load(arms):
    for chain, name in zip(arms, ("left_arm", "right_arm")):
        assert chain.name == name
        assert chain.dof == 7
        assert np.all(chain.home >= chain.lower_limits)
        assert np.all(chain.home <= chain.upper_limits)
        assert chain.tool.translation[2] > 0


MINIMAL = """
name t
[joint 1]
axis 0 0 1
origin 0 0 0 0 0 0
limits -1 1 1
[link 1]
mass 1
com 0 0 0
"""


@pytest.mark.parametrize(
    "old,new,message",
    [
        ("limits -1 1 1", "limits -1 1 1\naxis 0 0 1", "duplicate joint key"),
        ("limits -1 1 1", "limits -1 1 1\ntwist 0 0 1", "unknown joint key"),
        ("axis 0 0 1", "axis 0 0", "expects 3 numbers"),
        ("axis 0 0 1", "axis 0 0 2", "unit vector"),
    ],
)
def test_chain_file_rejects_bad_joint_lines(old, new, message):
    with pytest.raises(ChainFileError, match=message):
        kin.parse_chain(MINIMAL.replace(old, new))


def test_chain_file_rejects_structural_errors():
    with pytest.raises(ChainFileError, match="no joints"):
        kin.parse_chain("name x\n")
    with pytest.raises(ChainFileError, match="contiguous"):
        kin.parse_chain(MINIMAL.replace("[joint 1]", "[joint 2]"))
    with pytest.raises(ChainFileError, match="matching"):
        kin.parse_chain(MINIMAL.replace("[link 1]", "[link 2]"))
    with pytest.raises(ChainFileError, match="unknown section"):
        kin.parse_chain(MINIMAL + "\n[frame 1]\n")
    with pytest.raises(ChainFileError, match="unknown top-level key"):
        kin.parse_chain("version 2\n" + MINIMAL)
    with pytest.raises(ChainFileError, match="lower < upper"):
        kin.parse_chain(MINIMAL.replace("limits -1 1 1", "limits 1 -1 1"))
    with pytest.raises(ChainFileError, match="outside joint limits"):
        kin.parse_chain(MINIMAL.replace("name t", "name t\nhome 3"))
    with pytest.raises(ChainFileError, match="max_velocity"):
        kin.parse_chain(MINIMAL.replace("limits -1 1 1", "limits -1 1 0"))


def test_chain_file_error_carries_line_number():
    text = MINIMAL.replace("axis 0 0 1", "axis a b c")
    with pytest.raises(ChainFileError) as info:
        kin.parse_chain(text)
    assert info.value.line == 4
