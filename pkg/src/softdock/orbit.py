"""Two-body propagation of the target orbit.

The dynamics model needs the target radius, true anomaly and its first two
time derivatives at arbitrary instants. These are generated analytically
from Keplerian elements rather than integrated.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DegenerateGeometryError, ParameterError

MU_EARTH = 3.986004418e14  # m^3/s^2
R_EARTH = 6371000.0  # m


@dataclass(frozen=True)
class OrbitElements:
    semi_major_axis: float
    eccentricity: float = 0.0
    true_anomaly_0: float = 0.0
    mu: float = MU_EARTH

    def __post_init__(self):
        if not self.semi_major_axis > R_EARTH:
            raise ParameterError("semi_major_axis must exceed the Earth radius")
        if not 0.0 <= self.eccentricity < 1.0:
            raise ParameterError("eccentricity must lie in [0, 1)")
        if not self.mu > 0.0:
            raise ParameterError("mu must be positive")

    @classmethod
    def circular(cls, altitude, mu=MU_EARTH):
        return cls(R_EARTH + altitude, 0.0, 0.0, mu)

    @property
    def mean_motion(self):
        return np.sqrt(self.mu / self.semi_major_axis**3)

    @property
    def period(self):
        return 2.0 * np.pi / self.mean_motion


@dataclass(frozen=True)
class OrbitState:
    """Target orbit snapshot plus the chaser radius."""

    r_t: float
    gamma: float
    gamma_dot: float
    gamma_ddot: float
    r_c: float
    mu: float = MU_EARTH


def solve_kepler(mean_anomaly, e, tol=1e-12, max_iter=50):
    """Eccentric anomaly E with ``E - e sin E = M`` (damped Newton from E0 = M)."""
    if not 0.0 <= e < 1.0:
        raise ParameterError("eccentricity must lie in [0, 1)")
    M = float(mean_anomaly)
    E = M
    for _ in range(max_iter):
        f = E - e * np.sin(E) - M
        if abs(f) < tol:
            # one more Newton step costs little and lands at rounding level
            E2 = E - f / (1.0 - e * np.cos(E))
            return E2 if abs(E2 - e * np.sin(E2) - M) <= abs(f) else E
        step = f / (1.0 - e * np.cos(E))
        # damping keeps the first iterates bounded near e -> 1
        if abs(step) > 1.0:
            step = np.copysign(1.0, step)
        E -= step
    if abs(E - e * np.sin(E) - M) < tol:
        return E
    raise ConvergenceError(f"Kepler solve did not converge for M={M}, e={e}")


def _eccentric_from_true(nu, e):
    return 2.0 * np.arctan2(np.sqrt(1.0 - e) * np.sin(nu / 2.0), np.sqrt(1.0 + e) * np.cos(nu / 2.0))


def _true_from_eccentric(E, e):
    return 2.0 * np.arctan2(np.sqrt(1.0 + e) * np.sin(E / 2.0), np.sqrt(1.0 - e) * np.cos(E / 2.0))


def propagate_target(elements, t):
    """Return ``(r_t, gamma, gamma_dot, gamma_ddot)`` at time ``t`` seconds.

    ``gamma`` is unwrapped: it keeps increasing past 2*pi.
    """
    a, e, mu = elements.semi_major_axis, elements.eccentricity, elements.mu
    n = np.sqrt(mu / a**3)
    if e == 0.0:
        return a, elements.true_anomaly_0 + n * t, n, 0.0

    E0 = _eccentric_from_true(elements.true_anomaly_0, e)
    M0 = E0 - e * np.sin(E0)
    M = M0 + n * t
    revs = np.floor((M + np.pi) / (2.0 * np.pi))
    E = solve_kepler(M - 2.0 * np.pi * revs, e)
    gamma = _true_from_eccentric(E, e) + 2.0 * np.pi * revs
    r_t = a * (1.0 - e * np.cos(E))
    h = np.sqrt(mu * a * (1.0 - e * e))
    gamma_dot = h / r_t**2
    r_dot = mu / h * e * np.sin(gamma)
    gamma_ddot = -2.0 * r_dot * gamma_dot / r_t
    return r_t, gamma, gamma_dot, gamma_ddot


def chaser_radius(r_t, p):
    """Chaser distance from Earth's centre given the LVLH offset ``p``."""
    if not r_t > 0.0:
        raise DegenerateGeometryError("target radius must be positive")
    return float(np.sqrt((r_t + p[0]) ** 2 + p[1] ** 2 + p[2] ** 2))


def orbit_state(elements, t, p):
    """Full OrbitState at time ``t`` for a chaser at LVLH offset ``p``."""
    r_t, gamma, gamma_dot, gamma_ddot = propagate_target(elements, t)
    return OrbitState(r_t, gamma, gamma_dot, gamma_ddot, chaser_radius(r_t, p), elements.mu)
