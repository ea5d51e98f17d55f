"""Thruster configuration matrices and feedforward allocation."""

from dataclasses import dataclass

import numpy as np

from .errors import AllocationError, ParameterError

PINV_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class AllocationConfig:
    """Force map ``F_a``, torque map ``T_a``, stacked ``G`` and its pseudo-inverse."""

    F_a: np.ndarray
    T_a: np.ndarray
    G: np.ndarray
    G_pinv: np.ndarray
    lever_arms: tuple

    def wrench(self, f_a):
        """Body force and torque produced by thruster forces ``f_a``."""
        return self.F_a @ f_a, self.T_a @ f_a


def force_map():
    return np.array([
        [0.0, 0.0, 1.0, -1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0, -1.0],
        [1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
    ])


def torque_map(L1, L2, L3):
    h1, h2, h3 = L1 / 2.0, L2 / 2.0, L3 / 2.0
    return np.array([
        [h2, h2, 0.0, 0.0, h3, h3],
        [-h1, -h1, h3, h3, 0.0, 0.0],
        [0.0, 0.0, -h2, -h2, h1, h1],
    ])


def pseudo_inverse(G, rtol=PINV_RTOL):
    """SVD pseudo-inverse, raising if ``G`` loses row rank at ``rtol``."""
    U, s, Vt = np.linalg.svd(G, full_matrices=False)
    rank = int(np.sum(s > rtol * s[0])) if s.size else 0
    if rank < G.shape[0]:
        raise AllocationError(
            f"configuration matrix has rank {rank} < {G.shape[0]}; "
            "thrusters cannot command every force/torque direction"
        )
    return (Vt.T / s) @ U.T


def build_allocation(L1, L2, L3):
    """Six-thruster configuration with lever arms ``L1, L2, L3`` (metres)."""
    if min(L1, L2, L3) <= 0.0:
        raise ParameterError("lever arms must be positive")
    F_a = force_map()
    T_a = torque_map(L1, L2, L3)
    G = np.vstack([F_a, T_a])
    G_pinv = pseudo_inverse(G)
    for arr in (F_a, T_a, G, G_pinv):
        arr.setflags(write=False)
    return AllocationConfig(F_a, T_a, G, G_pinv, (float(L1), float(L2), float(L3)))


def feedforward(n_t, n_r, alloc):
    """Thruster forces ``u1`` with ``G @ u1 == [n_t; n_r]``."""
    return alloc.G_pinv @ np.concatenate([n_t, n_r])
