"""Self-check suites run by ``softdock verify``.

Each group draws random cases from a fixed seed and reports the worst value of
its invariant against a threshold. ``quick`` runs a handful of cases per group,
``full`` runs the 1000-case random suites.
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .allocation import build_allocation, feedforward
from .attitude import kinematics_matrix, quat_multiply, to_full
from .dynamics import (
    RelativeState,
    SpacecraftParams,
    TargetAttitudeState,
    assemble_plant,
    truth_derivative,
)
from .orbit import OrbitElements, orbit_state, solve_kepler
from .robpole import assign_poles
from .sim import rk4_step

LEVELS = ("quick", "full")


@dataclass
class CheckResult:
    name: str
    cases: int
    worst: float
    threshold: float
    passed: bool
    seconds: float = 0.0


def _random_spd(rng, scale=10.0):
    M = rng.standard_normal((3, 3))
    return scale * np.eye(3) + 0.5 * (M + M.T)


def _random_assignment(rng):
    n = int(rng.integers(3, 9))
    m = int(rng.integers(2, min(n, 6) + 1))
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    poles = -rng.choice(np.arange(1, 10 * n + 1), n, replace=False) / 10.0 - 0.1
    return A, B, poles, assign_poles(A, B, poles)


def check_robpole(n_cases, rng):
    """Relative eigenstructure residual of assign_poles."""
    worst = 0.0
    for _ in range(n_cases):
        *_, g = _random_assignment(rng)
        worst = max(worst, g.residual)
    return worst, 1e-8


def check_eigenvalues(n_cases, rng):
    """Distance between the closed-loop spectrum and the requested poles."""
    worst = 0.0
    for _ in range(n_cases):
        A, B, poles, g = _random_assignment(rng)
        ev = np.sort(np.linalg.eigvals(A + B @ g.K).real)
        worst = max(worst, np.max(np.abs(ev - np.sort(poles))))
    return worst, 1e-6


def check_feedforward(n_cases, rng):
    worst = 0.0
    for _ in range(n_cases):
        alloc = build_allocation(*rng.uniform(0.5, 3.0, 3))
        offset = rng.normal(0.0, 10.0, 6)
        u1 = feedforward(offset[:3], offset[3:], alloc)
        worst = max(worst, np.linalg.norm(alloc.G @ u1 - offset) / max(1.0, np.linalg.norm(offset)))
    return worst, 1e-10


def check_kinematics(n_cases, rng):
    """Componentwise truth derivative against the assembled LTV form, and the
    reduced kinematics against the full quaternion product."""
    worst = 0.0
    orbit = OrbitElements(6_800_000.0, 0.05)
    for _ in range(n_cases):
        params = SpacecraftParams(
            rng.uniform(5, 20), _random_spd(rng), _random_spd(rng), *rng.uniform(0.5, 3.0, 3)
        )
        alloc = build_allocation(params.L1, params.L2, params.L3)
        qt = rng.standard_normal(4)
        target = TargetAttitudeState(qt / np.linalg.norm(qt), rng.normal(0, 0.05, 3))
        qv = rng.standard_normal(3)
        qv *= rng.uniform(0.0, 0.95) / np.linalg.norm(qv)
        x = RelativeState(rng.normal(0, 10, 3), rng.normal(0, 1, 3), qv, rng.normal(0, 0.1, 3)).as_vector()
        f = rng.normal(0, 5, 6)
        orb = orbit_state(orbit, rng.uniform(0, 5000), x[:3])
        plant = assemble_plant(x, orb, target, params, alloc)
        lin = plant.A @ x - plant.n_d + plant.B @ f
        tru = truth_derivative(x, f, None, orb, target, params, alloc)
        worst = max(worst, np.linalg.norm(lin - tru) / max(1.0, np.linalg.norm(tru)))
        w = x[9:]
        qdot = 0.5 * quat_multiply(to_full(qv), np.concatenate([[0.0], w]))
        worst = max(worst, np.linalg.norm(0.5 * kinematics_matrix(qv) @ w - qdot[1:]))
    return worst, 1e-10


def check_integrator(n_cases, rng):
    """Empirical RK4 order on dx/dt = M x; reports 4 - min(order, 4)."""
    worst = 0.0
    for _ in range(n_cases):
        M = rng.standard_normal((4, 4))
        M -= (np.max(np.linalg.eigvals(M).real) + 0.5) * np.eye(4)
        x0 = rng.standard_normal(4)
        exact = expm(M * 1.0) @ x0
        errs = []
        for steps in (20, 40):
            x, h = x0.copy(), 1.0 / steps
            for k in range(steps):
                x = rk4_step(lambda t, y: M @ y, x, k * h, h)
            errs.append(np.linalg.norm(x - exact))
        order = np.log2(errs[0] / errs[1])
        worst = max(worst, 4.0 - min(order, 4.0))
    return worst, 0.1


def check_kepler(n_cases, rng):
    worst = 0.0
    for _ in range(n_cases):
        M = rng.uniform(-np.pi, np.pi)
        e = rng.uniform(0.0, 0.99)
        E = solve_kepler(M, e)
        worst = max(worst, abs(E - e * np.sin(E) - M))
    return worst, 1e-12


# name -> (check, quick cases, full cases)
CHECKS = {
    "robpole residuals": (check_robpole, 20, 1000),
    "robpole eigenvalues": (check_eigenvalues, 20, 1000),
    "feedforward exactness": (check_feedforward, 50, 1000),
    "kinematics consistency": (check_kinematics, 50, 1000),
    "integrator order": (check_integrator, 5, 50),
    "kepler residual": (check_kepler, 100, 1000),
}


def run_suite(level="quick", seed=0):
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    results = []
    for i, (name, (fn, n_quick, n_full)) in enumerate(CHECKS.items()):
        n = n_quick if level == "quick" else n_full
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, i])))
        t0 = time.perf_counter()
        try:
            worst, threshold = fn(n, rng)
            ok = bool(np.isfinite(worst) and worst < threshold)
        except Exception as exc:  # a crashing suite counts as a failure
            worst, threshold, ok = np.inf, np.nan, False
            name = f"{name} ({type(exc).__name__}: {exc})"
        results.append(CheckResult(name, n, float(worst), float(threshold), ok, time.perf_counter() - t0))
    return results


def format_table(results):
    rows = [f"{'group':<28} {'cases':>6} {'worst':>11} {'limit':>9} {'time':>7}  status"]
    for r in results:
        rows.append(
            f"{r.name:<28} {r.cases:>6} {r.worst:>11.3e} {r.threshold:>9.1e} "
            f"{r.seconds:>6.2f}s  {'PASS' if r.passed else 'FAIL'}"
        )
    return "\n".join(rows)
