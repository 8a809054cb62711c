"""Regularized differential inverse kinematics.

One tick solves

    min_dq  ||J dq - e||^2 + omega_q ||dq - dq_ref||^2 + mu^2 ||dq||^2

for the joint increment ``dq``.  ``e`` is a body-frame Cartesian error
twist (angular; linear), so ``J`` must be the body Jacobian
(``kinematics.body_jacobian``).  ``dq_ref`` is the leader-arm joint
delta in leader-follower mode and zero for VR input.

The objective is strictly convex whenever ``omega_q + mu^2 > 0``; its
unique stationary point solves the normal equations

    (J^T J + (omega_q + mu^2) I) dq = J^T e + omega_q dq_ref

which a dense Cholesky factorization handles directly.  The increment is
then clipped per joint to ``max_step``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DimensionMismatch, NonFiniteInput, SingularMatrix
from .geometry import Pose, Twist, compose, inverse, log


@dataclass(frozen=True)
class IKParams:
    omega_q: float = 0.0  # joint-matching weight; 1.0 in leader-follower mode
    mu: float = 1e-2  # Tikhonov damping
    max_step: float = 0.05  # per-joint increment cap, radians per tick
    tracking_gain: float = 1.0  # scales the Cartesian error before the solve

    def __post_init__(self):
        if self.omega_q < 0 or self.mu < 0:
            raise ValueError("omega_q and mu must be non-negative")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")
        if not 0 < self.tracking_gain <= 1.0:
            raise ValueError("tracking_gain must lie in (0, 1]")


@dataclass(frozen=True)
class IKSolution:
    delta_q: np.ndarray
    cart_residual: float  # ||J dq - e|| for the returned (clipped) increment
    clipped: bool
    condition_hint: float  # smallest singular value of J


def cartesian_error(current: Pose, desired: Pose) -> Twist:
    """Body-frame error twist: log(current^-1 * desired)."""
    return log(compose(inverse(current), desired))


def _check_jacobian(jac) -> np.ndarray:
    j = np.asarray(jac, dtype=np.float64)
    if j.ndim != 2 or j.shape[0] != 6:
        raise DimensionMismatch(f"Jacobian must have shape (6, k), got {j.shape}")
    if not np.all(np.isfinite(j)):
        raise NonFiniteInput("Jacobian contains non-finite values")
    return j


def solve_task_increment(
    jac, error, params: IKParams, dq_reference=None
) -> IKSolution:
    """One regularized IK step; see the module docstring for the objective."""
    j = _check_jacobian(jac)
    k = j.shape[1]
    if isinstance(error, Twist):
        e = error.as_vector()
    else:
        e = np.asarray(error, dtype=np.float64)
    if e.shape != (6,):
        raise DimensionMismatch(f"error must be a 6-vector, got {e.shape}")
    if not np.all(np.isfinite(e)):
        raise NonFiniteInput("error contains non-finite values")
    if dq_reference is None:
        dq_ref = np.zeros(k)
    else:
        dq_ref = np.asarray(dq_reference, dtype=np.float64)
        if dq_ref.shape != (k,):
            raise DimensionMismatch(f"dq_reference must have shape ({k},), got {dq_ref.shape}")
        if not np.all(np.isfinite(dq_ref)):
            raise NonFiniteInput("dq_reference contains non-finite values")

    e = params.tracking_gain * e
    reg = params.omega_q + params.mu * params.mu
    normal = j.T @ j + reg * np.eye(k)
    rhs = j.T @ e + params.omega_q * dq_ref
    try:
        dq = cho_solve(cho_factor(normal), rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(
            "normal matrix is singular; keep mu > 0 or omega_q > 0 at rank-deficient J"
        ) from exc

    clipped = bool(np.any(np.abs(dq) > params.max_step))
    dq = np.clip(dq, -params.max_step, params.max_step)
    residual = float(np.linalg.norm(j @ dq - e))
    sigma = np.linalg.svd(j, compute_uv=False)
    return IKSolution(
        delta_q=dq,
        cart_residual=residual,
        clipped=clipped,
        condition_hint=float(sigma[-1]),
    )


def damped_pseudoinverse(jac, damping: float = 1e-3) -> np.ndarray:
    """J^T (J J^T + damping^2 I)^-1, shape (k, 6).

    With damping = 0 this is the exact pseudoinverse of a full-row-rank
    Jacobian and raises SingularMatrix when J J^T is singular.
    """
    j = _check_jacobian(jac)
    if damping < 0:
        raise ValueError("damping must be non-negative")
    gram = j @ j.T + damping * damping * np.eye(6)
    if damping == 0.0:
        sigma = np.linalg.svd(gram, compute_uv=False)
        if sigma[-1] < 1e-12 * max(sigma[0], 1.0):
            raise SingularMatrix("J J^T is singular and no damping was requested")
    return j.T @ np.linalg.solve(gram, np.eye(6))
