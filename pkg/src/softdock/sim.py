"""Closed-loop simulation and Monte Carlo robustness study.

The controller always designs against the nominal spacecraft parameters.
The truth model may use perturbed inertias and lever arms and receives an
additive disturbance on the thruster channel. Thrust is held constant over
each sampling interval and the truth model is integrated with fixed-step RK4
on a finer grid.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import attitude
from .allocation import build_allocation
from .controller import Controller, ControllerConfig, StabilityLog
from .dynamics import (
    N_INPUT, N_STATE, P, Q, RelativeState, SpacecraftParams, TargetAttitudeState,
    truth_derivative,
)
from .errors import ConfigError, SoftdockError
from .orbit import OrbitElements, orbit_state
from .robpole import condition_number, random_admissible_selection

log = logging.getLogger(__name__)

# independent RNG streams per run
STREAM_PERTURB, STREAM_DISTURB, STREAM_BASELINE = 0, 1, 2


def rk4_step(f, x, t, h, project=None):
    """One classical Runge-Kutta step of ``dx/dt = f(t, x)``.

    ``project`` is applied to the result, e.g. to pull the quaternion back
    into the unit ball.
    """
    if not h > 0.0:
        raise ValueError("step must be positive")
    k1 = f(t, x)
    k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = f(t + h, x + h * k3)
    out = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return project(out) if project is not None else out


def project_state(x):
    x = np.array(x, dtype=float)
    x[Q] = attitude.project_to_ball(x[Q])
    return x


def nominal_params():
    J_t = np.array([[10.0, 2.5, 3.5], [2.5, 10.0, 4.5], [3.5, 4.5, 10.0]])
    return SpacecraftParams(10.0, 10.0 * np.eye(3), J_t, 2.0, 2.0, 2.0)


def nominal_initial_state():
    q0 = np.array([0.3772, -0.4329, 0.6645, 0.4783])
    return RelativeState(
        p=np.array([10.0, -10.0, 10.0]),
        r=np.array([5.0, -4.0, 4.0]),
        qv=attitude.to_reduced(q0),
        w=np.zeros(3),
    )


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    orbit: OrbitElements = field(default_factory=lambda: OrbitElements.circular(250e3))
    initial_state: RelativeState = field(default_factory=nominal_initial_state)
    target: TargetAttitudeState = field(default_factory=TargetAttitudeState)
    params: SpacecraftParams = field(default_factory=nominal_params)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    duration: float = 80.0
    integrator_step: float = 0.01
    disturbance_fraction: float = 0.0
    seed: int = 0
    finite_difference_velocity: bool = False
    kappa_baseline_stride: int = 0
    truth_params: SpacecraftParams | None = None

    def __post_init__(self):
        if not self.duration > 0.0:
            raise ConfigError("must be positive", field="duration")
        if not self.integrator_step > 0.0:
            raise ConfigError("must be positive", field="integrator_step")
        if self.integrator_step > self.controller.sample_period:
            raise ConfigError("must not exceed the sample period", field="integrator_step")
        if self.disturbance_fraction < 0.0:
            raise ConfigError("must be nonnegative", field="disturbance_fraction")
        if self.kappa_baseline_stride < 0:
            raise ConfigError("must be nonnegative", field="kappa_baseline_stride")
        # sampling grid checks raise here rather than mid-run
        self.grid()

    def grid(self):
        """Return ``(substeps_per_sample, n_samples)``."""
        ts = self.controller.sample_period
        sub = round(ts / self.integrator_step)
        if abs(sub * self.integrator_step - ts) > 1e-9 * ts:
            raise ConfigError("sample period must be a multiple of it", field="integrator_step")
        n = round(self.duration / ts)
        if abs(n * ts - self.duration) > 1e-9 * self.duration:
            raise ConfigError("must be a multiple of the sample period", field="duration")
        return sub, n


@dataclass(frozen=True)
class PerturbationSpec:
    inertia_entry_bound: float = 1.0
    lever_arm_bound: float = 0.01
    disturbance_fraction: float = 0.1

    def __post_init__(self):
        for name in ("inertia_entry_bound", "lever_arm_bound", "disturbance_fraction"):
            if getattr(self, name) < 0.0:
                raise ConfigError("must be nonnegative", field=name)


@dataclass(eq=False)
class TrajectoryRecord:
    """Time series on the integrator grid plus per-sample controller diagnostics.

    ``f_a`` holds the commanded thrust in force over ``[t[k], t[k+1])``; the
    final row repeats the last command.
    """

    t: np.ndarray
    x: np.ndarray
    f_a: np.ndarray
    max_re_eig: np.ndarray
    det_x: np.ndarray
    kappa: np.ndarray
    sample_t: np.ndarray
    sample_kappa: np.ndarray
    sample_residual: np.ndarray
    sample_eig_error: np.ndarray
    sample_norm: np.ndarray
    baseline_kappa: np.ndarray
    stability: StabilityLog
    held_steps: int = 0
    failed: bool = False
    error: str | None = None

    @property
    def n_rows(self):
        return self.t.size


def _sampling_rng(seed, run_index, stream):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, run_index, stream])))


def _draw_disturbance(rng, f_a, fraction):
    direction = rng.standard_normal(N_INPUT)
    direction /= np.linalg.norm(direction)
    return direction * rng.uniform(0.0, fraction * np.linalg.norm(f_a))


def run_closed_loop(cfg, run_index=0):
    """Simulate one closed-loop run; errors end the run with a partial, flagged record."""
    sub, n_samples = cfg.grid()
    h = cfg.integrator_step
    ts = cfg.controller.sample_period
    nominal = cfg.params
    truth = cfg.truth_params or nominal
    alloc_nom = build_allocation(nominal.L1, nominal.L2, nominal.L3)
    alloc_true = build_allocation(truth.L1, truth.L2, truth.L3)
    ctrl = Controller(nominal, alloc_nom, cfg.controller)
    target = cfg.target
    vs = cfg.controller.verbatim_stiffness
    dist_rng = _sampling_rng(cfg.seed, run_index, STREAM_DISTURB)
    base_rng = _sampling_rng(cfg.seed, run_index, STREAM_BASELINE)

    n_rows = n_samples * sub + 1
    T = np.arange(n_rows) * h
    X = np.full((n_rows, N_STATE), np.nan)
    F = np.full((n_rows, N_INPUT), np.nan)
    max_re = np.full(n_rows, np.nan)
    det_x = np.full(n_rows, np.nan)
    kappa = np.full(n_rows, np.nan)
    s_t = np.arange(n_samples) * ts
    s_kappa = np.full(n_samples, np.nan)
    s_res = np.full(n_samples, np.nan)
    s_eig = np.full(n_samples, np.nan)
    s_norm = np.full(n_samples, np.nan)
    baseline = []
    stab = StabilityLog()
    poles_sorted = np.sort(ctrl.poles)

    x = cfg.initial_state.as_vector()
    X[0] = x
    prev_p = None
    failed, error, row = False, None, 0

    def deriv(t, xs, f_a, dist):
        orb = orbit_state(cfg.orbit, t, xs[P])
        return truth_derivative(xs, f_a, dist, orb, target, truth, alloc_true, vs)

    try:
        for k in range(n_samples):
            t_k = k * ts
            meas = x.copy()
            if cfg.finite_difference_velocity and prev_p is not None:
                meas[3:6] = (x[P] - prev_p) / ts
            prev_p = x[P].copy()
            cmd = ctrl.step(meas, orbit_state(cfg.orbit, t_k, meas[P]), target)
            stab.add(cmd.stability)
            g = cmd.gain
            s_kappa[k] = g.kappa
            s_res[k] = g.residual
            s_norm[k] = cmd.stability.norm
            ev = cmd.stability.eigenvalues
            s_eig[k] = np.max(np.abs(ev[np.argsort(ev.real)] - poles_sorted))
            if cfg.kappa_baseline_stride and k % cfg.kappa_baseline_stride == 0:
                Xr = random_admissible_selection(cmd.plant.A, ctrl.B, ctrl.poles, base_rng, ctrl.factors)
                baseline.append(condition_number(Xr))
            f_a = cmd.f_a
            dist = None
            if cfg.disturbance_fraction > 0.0:
                d = _draw_disturbance(dist_rng, f_a, cfg.disturbance_fraction)
                dist = alloc_true.wrench(d)
            for j in range(sub):
                F[row] = f_a
                max_re[row] = cmd.stability.max_real
                det_x[row] = g.det_X
                kappa[row] = g.kappa
                t = T[row]
                x = rk4_step(lambda tt, xx: deriv(tt, xx, f_a, dist), x, t, h, project_state)
                if not np.all(np.isfinite(x)):
                    raise FloatingPointError(f"state diverged at t={t + h:.3f}")
                row += 1
                X[row] = x
        F[row] = F[row - 1]
        max_re[row], det_x[row], kappa[row] = max_re[row - 1], det_x[row - 1], kappa[row - 1]
    except (SoftdockError, FloatingPointError, np.linalg.LinAlgError) as exc:
        failed, error = True, f"{type(exc).__name__}: {exc}"
        log.warning("run %d failed: %s", run_index, error)
        keep = row + 1
        T, X, F = T[:keep], X[:keep], F[:keep]
        max_re, det_x, kappa = max_re[:keep], det_x[:keep], kappa[:keep]

    return TrajectoryRecord(
        t=T, x=X, f_a=F, max_re_eig=max_re, det_x=det_x, kappa=kappa,
        sample_t=s_t, sample_kappa=s_kappa, sample_residual=s_res,
        sample_eig_error=s_eig, sample_norm=s_norm,
        baseline_kappa=np.asarray(baseline), stability=stab,
        held_steps=ctrl.failures, failed=failed, error=error,
    )


def _perturb_inertia(J, bound, rng):
    if bound == 0.0:
        return J.copy()
    while True:
        E = np.triu(rng.uniform(-bound, bound, (3, 3)))
        Jp = J + E + np.triu(E, 1).T
        if np.linalg.eigvalsh(Jp).min() > 0.0:
            return Jp


def perturbed_params(params, perturb, rng):
    """Truth-model parameters with random inertia and lever-arm errors."""
    J_c = _perturb_inertia(params.J_c, perturb.inertia_entry_bound, rng)
    J_t = _perturb_inertia(params.J_t, perturb.inertia_entry_bound, rng)
    b = perturb.lever_arm_bound
    dL = rng.uniform(-b, b, 3) if b > 0.0 else np.zeros(3)
    return SpacecraftParams(params.m_c, J_c, J_t, params.L1 + dL[0], params.L2 + dL[1], params.L3 + dL[2])


def monte_carlo_config(cfg, perturb, run_index, seed):
    rng = _sampling_rng(seed, run_index, STREAM_PERTURB)
    return replace(
        cfg,
        truth_params=perturbed_params(cfg.params, perturb, rng),
        disturbance_fraction=perturb.disturbance_fraction,
        seed=seed,
    )


def _mc_worker(args):
    cfg, perturb, i, seed = args
    return run_closed_loop(monte_carlo_config(cfg, perturb, i, seed), run_index=i)


@dataclass(eq=False)
class Ensemble:
    records: list
    summary: dict
    wall_time_s: float = 0.0


def monte_carlo(cfg, perturb, n_runs, seed, workers=1, p_tol=0.1, q_tol=0.02):
    """Run ``n_runs`` perturbed simulations; results are ordered by run index."""
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    jobs = [(cfg, perturb, i, seed) for i in range(n_runs)]
    started = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_mc_worker, jobs))
    else:
        records = [_mc_worker(j) for j in jobs]
    return Ensemble(records, ensemble_summary(records, p_tol, q_tol), time.perf_counter() - started)


def terminal_norms(record):
    x_end = record.x[-1]
    return float(np.linalg.norm(x_end[P])), float(np.linalg.norm(x_end[Q]))


def converged(record, p_tol, q_tol):
    if record.failed:
        return False
    p_end, q_end = terminal_norms(record)
    return p_end < p_tol and q_end < q_tol


def ensemble_summary(records, p_tol=0.1, q_tol=0.02, percentiles=(5, 50, 95)):
    ok = [converged(r, p_tol, q_tol) for r in records]
    done = [r for r in records if not r.failed]
    summary = {
        "n_runs": len(records),
        "converged_count": int(sum(ok)),
        "failed_count": int(sum(r.failed for r in records)),
        "p_tol": p_tol,
        "q_tol": q_tol,
    }
    if done:
        n = min(r.t.size for r in done)
        p_norm = np.array([np.linalg.norm(r.x[:n, P], axis=1) for r in done])
        q_norm = np.array([np.linalg.norm(r.x[:n, Q], axis=1) for r in done])
        summary["envelope_t"] = done[0].t[:n]
        summary["p_envelope"] = {f"p{q}": np.percentile(p_norm, q, axis=0) for q in percentiles}
        summary["q_envelope"] = {f"p{q}": np.percentile(q_norm, q, axis=0) for q in percentiles}
        summary["max_thrust_N"] = float(max(np.nanmax(np.abs(r.f_a)) for r in done))
        summary["median_kappa"] = float(np.median(np.concatenate([r.sample_kappa for r in done])))
        base = np.concatenate([r.baseline_kappa for r in done])
        summary["median_kappa_random"] = float(np.median(base)) if base.size else None
    return summary
