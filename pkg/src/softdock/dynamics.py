"""Relative translation/attitude model written as an LTV system.

State ordering is fixed as ``x = [p(3), r(3), qv(3), w(3)]``:

* ``p``  relative position in the target LVLH frame (m)
* ``r``  relative velocity, ``dp/dt`` (m/s)
* ``qv`` vector part of the relative quaternion
* ``w``  relative angular rate in the chaser body frame (rad/s)

The model reads ``dx/dt = A(t) x - n_d(t) + B f_a``. Every nonlinearity lives
in the coefficients, so the same assembly serves as the truth model and as
the plant the controller designs against.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .attitude import IDENTITY, kinematics_matrix, rotation_from_quat, skew, to_full
from .errors import DegenerateGeometryError, ParameterError, SingularAttitudeError
from .orbit import MU_EARTH

N_STATE = 12
N_INPUT = 6

P, R, Q, W = slice(0, 3), slice(3, 6), slice(6, 9), slice(9, 12)


def _spd(M, name):
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3) or not np.allclose(M, M.T, rtol=0.0, atol=1e-12):
        raise ParameterError(f"{name} must be a symmetric 3x3 matrix")
    if np.linalg.eigvalsh(M).min() <= 0.0:
        raise ParameterError(f"{name} must be positive definite")
    return M


@dataclass(frozen=True, eq=False)
class SpacecraftParams:
    m_c: float
    J_c: np.ndarray
    J_t: np.ndarray
    L1: float
    L2: float
    L3: float

    def __post_init__(self):
        if not self.m_c > 0.0:
            raise ParameterError("chaser mass must be positive")
        if min(self.L1, self.L2, self.L3) <= 0.0:
            raise ParameterError("lever arms must be positive")
        object.__setattr__(self, "J_c", _spd(self.J_c, "J_c"))
        object.__setattr__(self, "J_t", _spd(self.J_t, "J_t"))

    @cached_property
    def J_c_inv(self):
        return np.linalg.inv(self.J_c)

    @cached_property
    def J_t_inv(self):
        return np.linalg.inv(self.J_t)


@dataclass
class RelativeState:
    p: np.ndarray
    r: np.ndarray
    qv: np.ndarray
    w: np.ndarray

    def as_vector(self):
        return np.concatenate([self.p, self.r, self.qv, self.w]).astype(float)

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x[P].copy(), x[R].copy(), x[Q].copy(), x[W].copy())

    @classmethod
    def zero(cls):
        return cls.from_vector(np.zeros(N_STATE))


@dataclass(frozen=True)
class TargetAttitudeState:
    q_i_tb: np.ndarray = field(default_factory=lambda: IDENTITY.copy())
    w_tb: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True, eq=False)
class PlantMatrices:
    A: np.ndarray
    B: np.ndarray
    n_d: np.ndarray
    n_t: np.ndarray
    n_r: np.ndarray


def state_vector(state):
    if isinstance(state, RelativeState):
        return state.as_vector()
    x = np.asarray(state, dtype=float)
    if x.shape != (N_STATE,):
        raise ValueError(f"state must have shape ({N_STATE},), got {x.shape}")
    return x


def coriolis_translation(gamma_dot, m_c):
    c = 2.0 * m_c * gamma_dot
    return np.array([
        [0.0, -c, 0.0],
        [c, 0.0, 0.0],
        [0.0, 0.0, 0.0],
    ])


def stiffness_translation(gamma_dot, gamma_ddot, r_c, m_c, mu=MU_EARTH, verbatim=False):
    """Translational stiffness matrix D_t.

    The in-plane diagonal is ``mu/r_c^3 - gamma_dot**2``. With
    ``verbatim=True`` the dimensionally inconsistent ``mu/r_c^3 - gamma_dot``
    is used instead.
    """
    if not r_c > 0.0:
        raise DegenerateGeometryError(f"chaser radius must be positive, got {r_c}")
    g = mu / r_c**3
    d = g - (gamma_dot if verbatim else gamma_dot * gamma_dot)
    return m_c * np.array([
        [d, -gamma_ddot, 0.0],
        [gamma_ddot, d, 0.0],
        [0.0, 0.0, g],
    ])


def gravity_offset(r_c, r_t, m_c, mu=MU_EARTH):
    if not (r_c > 0.0 and r_t > 0.0):
        raise DegenerateGeometryError(f"radii must be positive, got r_c={r_c}, r_t={r_t}")
    return np.array([m_c * mu * (r_t / r_c**3 - 1.0 / r_t**2), 0.0, 0.0])


def _target_rate_in_chaser(q, target):
    R_tc = rotation_from_quat(q)
    return R_tc, R_tc @ np.asarray(target.w_tb, dtype=float)


def attitude_coriolis(w, q, target, J_c):
    """C_r = J_c S(R w_t) + S(R w_t) J_c - S(J_c (w + R w_t))."""
    _, Rwt = _target_rate_in_chaser(q, target)
    S_rwt = skew(Rwt)
    return J_c @ S_rwt + S_rwt @ J_c - skew(J_c @ (np.asarray(w, dtype=float) + Rwt))


def attitude_offset(q, target, J_c, J_t):
    """n_r = S(R w_t) J_c R w_t - J_c R J_t^-1 S(w_t) J_t w_t."""
    J_t = np.asarray(J_t, dtype=float)
    if abs(np.linalg.det(J_t)) < 1e-12:
        raise ParameterError("target inertia is singular")
    wt = np.asarray(target.w_tb, dtype=float)
    R_tc, Rwt = _target_rate_in_chaser(q, target)
    gyro = np.linalg.solve(J_t, skew(wt) @ (J_t @ wt))
    return skew(Rwt) @ (J_c @ Rwt) - J_c @ (R_tc @ gyro)


def input_matrix(params, alloc):
    """Constant B = [0; F_a/m_c; 0; J_c^-1 T_a]."""
    B = np.zeros((N_STATE, N_INPUT))
    B[R] = alloc.F_a / params.m_c
    B[W] = params.J_c_inv @ alloc.T_a
    B.setflags(write=False)
    return B


class _Blocks:
    """Coefficient blocks at one state/time, shared by assembly and truth."""

    __slots__ = ("C_t", "D_t", "n_t", "T", "C_r", "n_r")

    def __init__(self, x, orbit, target, params, verbatim_stiffness):
        self.C_t = coriolis_translation(orbit.gamma_dot, params.m_c)
        self.D_t = stiffness_translation(
            orbit.gamma_dot, orbit.gamma_ddot, orbit.r_c, params.m_c, orbit.mu, verbatim_stiffness
        )
        self.n_t = gravity_offset(orbit.r_c, orbit.r_t, params.m_c, orbit.mu)
        qv = x[Q]
        self.T = kinematics_matrix(qv)
        if np.any(target.w_tb):
            q = to_full(qv)
            self.C_r = attitude_coriolis(x[W], q, target, params.J_c)
            self.n_r = attitude_offset(q, target, params.J_c, params.J_t)
        else:
            # inertially fixed target: only the gyroscopic term survives
            self.C_r = -skew(params.J_c @ x[W])
            self.n_r = np.zeros(3)


def assemble_plant(state, orbit, target, params, alloc, B=None, verbatim_stiffness=False):
    """LTV triple (A, B, n_d) at the given state, orbit snapshot and target motion."""
    x = state_vector(state)
    blk = _Blocks(x, orbit, target, params, verbatim_stiffness)
    inv_m = 1.0 / params.m_c
    A = np.zeros((N_STATE, N_STATE))
    A[P, R] = np.eye(3)
    A[R, P] = -inv_m * blk.D_t
    A[R, R] = -inv_m * blk.C_t
    A[Q, W] = 0.5 * blk.T
    A[W, W] = -params.J_c_inv @ blk.C_r
    n_d = np.zeros(N_STATE)
    n_d[R] = inv_m * blk.n_t
    n_d[W] = params.J_c_inv @ blk.n_r
    if B is None:
        B = input_matrix(params, alloc)
    return PlantMatrices(A, B, n_d, blk.n_t, blk.n_r)


def truth_derivative(state, f_a, disturbance, orbit, target, params, alloc, verbatim_stiffness=False):
    """State derivative of the full model under thruster forces and disturbances.

    ``disturbance`` is ``(f_d, t_d)`` in N and N*m, or None. Algebraically
    identical to ``A @ x - n_d + B @ f_a`` plus the disturbance terms, but
    evaluated component-wise since it sits in the integrator's inner loop.
    """
    x = state_vector(state)
    r_c, r_t, mu = orbit.r_c, orbit.r_t, orbit.mu
    if not (r_c > 0.0 and r_t > 0.0):
        raise DegenerateGeometryError(f"radii must be positive, got r_c={r_c}, r_t={r_t}")
    f_c, t_c = alloc.F_a @ f_a, alloc.T_a @ f_a
    if disturbance is not None:
        f_c = f_c + disturbance[0]
        t_c = t_c + disturbance[1]

    px, py, pz, vx, vy, vz, q1, q2, q3, w1, w2, w3 = x.tolist()
    gd, gdd = orbit.gamma_dot, orbit.gamma_ddot
    g = mu / r_c**3
    d = g - (gd if verbatim_stiffness else gd * gd)
    inv_m = 1.0 / params.m_c
    dx = np.empty(N_STATE)
    dx[0:3] = (vx, vy, vz)
    dx[3] = f_c[0] * inv_m - (d * px - gdd * py - 2.0 * gd * vy + mu * (r_t / r_c**3 - 1.0 / r_t**2))
    dx[4] = f_c[1] * inv_m - (gdd * px + d * py + 2.0 * gd * vx)
    dx[5] = f_c[2] * inv_m - g * pz

    n2 = q1 * q1 + q2 * q2 + q3 * q3
    if n2 >= 1.0:
        raise SingularAttitudeError(f"|qv|^2 = {n2:.12g}; reduced quaternion is singular")
    q0 = np.sqrt(1.0 - n2)
    dx[6] = 0.5 * (q0 * w1 - q3 * w2 + q2 * w3)
    dx[7] = 0.5 * (q3 * w1 + q0 * w2 - q1 * w3)
    dx[8] = 0.5 * (-q2 * w1 + q1 * w2 + q0 * w3)

    w = x[W]
    if np.any(target.w_tb):
        q = to_full(x[Q])
        torque = t_c - attitude_coriolis(w, q, target, params.J_c) @ w
        torque -= attitude_offset(q, target, params.J_c, params.J_t)
    else:
        # inertially fixed target: C_r w = -(J_c w) x w, n_r = 0
        h1, h2, h3 = (params.J_c @ w).tolist()
        torque = t_c + np.array([h2 * w3 - h3 * w2, h3 * w1 - h1 * w3, h1 * w2 - h2 * w1])
    dx[W] = params.J_c_inv @ torque
    return dx
