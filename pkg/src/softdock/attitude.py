"""Quaternion algebra and reduced-quaternion kinematics.

Quaternions are stored scalar-first, ``[q0, q1, q2, q3]``. A *reduced*
quaternion keeps only the vector part ``[q1, q2, q3]``; the scalar part is
recovered as ``sqrt(1 - |q|^2)`` and is therefore always nonnegative.
"""

import numpy as np

from .errors import SingularAttitudeError

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

# round-off allowance just outside the unit ball when recovering q0
BALL_TOL = 1e-9


def skew(v):
    """Cross-product matrix, so that ``skew(v) @ w == np.cross(v, w)``."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def quat_multiply(a, b):
    """Hamilton product ``a * b`` of two scalar-first quaternions."""
    a0, av = a[0], np.asarray(a[1:], dtype=float)
    b0, bv = b[0], np.asarray(b[1:], dtype=float)
    out = np.empty(4)
    out[0] = a0 * b0 - av @ bv
    out[1:] = a0 * bv + b0 * av + np.cross(av, bv)
    return out


def quat_inverse(a):
    """Inverse of a unit quaternion (its conjugate)."""
    a = np.asarray(a, dtype=float)
    return np.array([a[0], -a[1], -a[2], -a[3]])


def relative_quaternion(q_i_cb, q_i_tb):
    """Relative attitude ``q_i_cb^-1 * q_i_tb`` of the target seen from the chaser.

    Evaluated as the explicit 4x4 left-multiplication matrix of the target
    quaternion acting on the conjugated chaser quaternion.
    """
    t0, t1, t2, t3 = q_i_tb
    Mt = np.array([
        [t0, -t1, -t2, -t3],
        [t1, t0, t3, -t2],
        [t2, -t3, t0, t1],
        [t3, t2, -t1, t0],
    ])
    return Mt @ quat_inverse(q_i_cb)


def rotation_from_quat(q):
    """Rotation matrix ``(q0^2 - q.q) I + 2 q q^T - 2 q0 S(q)``."""
    q0 = q[0]
    qv = np.asarray(q[1:], dtype=float)
    return (q0 * q0 - qv @ qv) * np.eye(3) + 2.0 * np.outer(qv, qv) - 2.0 * q0 * skew(qv)


def scalar_part(qv):
    """Recover ``q0 >= 0`` from a reduced quaternion.

    Norms up to ``1 + BALL_TOL`` are clamped to ``q0 = 0``; anything larger
    cannot be a unit quaternion and raises.
    """
    n2 = float(np.dot(qv, qv))
    if n2 > 1.0 + BALL_TOL:
        raise SingularAttitudeError(f"|qv| = {np.sqrt(n2):.12g} exceeds 1")
    return np.sqrt(max(0.0, 1.0 - n2))


def to_full(qv):
    """Scalar-first unit quaternion from a reduced quaternion."""
    out = np.empty(4)
    out[0] = scalar_part(qv)
    out[1:] = qv
    return out


def to_reduced(q):
    """Vector part of ``q``, after flipping to the ``q0 >= 0`` hemisphere."""
    q = np.asarray(q, dtype=float)
    if q[0] < 0.0:
        q = -q
    return q[1:].copy()


def kinematics_matrix(qv):
    """Matrix T(q) in ``dq/dt = 0.5 * T(q) @ w`` for the reduced quaternion.

    Raises SingularAttitudeError when ``|qv| >= 1`` (q0 = 0 is the only
    singular point of this parameterisation).
    """
    q1, q2, q3 = qv
    n2 = q1 * q1 + q2 * q2 + q3 * q3
    if n2 >= 1.0:
        raise SingularAttitudeError(f"|qv|^2 = {n2:.12g}; reduced quaternion is singular")
    q0 = np.sqrt(1.0 - n2)
    return np.array([
        [q0, -q3, q2],
        [q3, q0, -q1],
        [-q2, q1, q0],
    ])


def relative_angular_velocity(w_cb, w_tb, R):
    """Chaser-frame relative rate ``w_cb - R @ w_tb``."""
    return np.asarray(w_cb, dtype=float) - R @ np.asarray(w_tb, dtype=float)


def project_to_ball(qv, margin=1e-12):
    """Scale ``qv`` back inside the open unit ball if integration pushed it out."""
    n = np.linalg.norm(qv)
    limit = 1.0 - margin
    if n > limit:
        return qv * (limit / n)
    return qv
