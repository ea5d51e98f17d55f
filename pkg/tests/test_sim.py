from dataclasses import replace

import numpy as np
import pytest
from scipy.linalg import expm

from softdock import sim
from softdock.controller import NOMINAL_POLES, ControllerConfig
from softdock.dynamics import RelativeState
from softdock.errors import ConfigError, DegenerateGeometryError
from softdock.metrics import compute_metrics
from softdock.sim import (
    PerturbationSpec,
    ScenarioConfig,
    _draw_disturbance,
    monte_carlo,
    nominal_params,
    perturbed_params,
    project_state,
    rk4_step,
    run_closed_loop,
    terminal_norms,
)


def short(**kw):
    return ScenarioConfig(duration=kw.pop("duration", 3.0), **kw)


def test_rk4_exponential():
    x1 = rk4_step(lambda t, x: -x, np.array([1.0]), 0.0, 0.1)
    assert abs(x1[0] - np.exp(-0.1)) < 1e-7
    # one RK4 step reproduces the 4th-order Taylor polynomial of exp(-h)
    h = 0.1
    assert x1[0] == pytest.approx(1 - h + h**2 / 2 - h**3 / 6 + h**4 / 24, abs=1e-15)


def test_rk4_constant_state():
    x = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(rk4_step(lambda t, y: np.zeros(3), x, 0.0, 0.5), x)


def test_rk4_fourth_order(rng):
    M = rng.standard_normal((5, 5)) - 2 * np.eye(5)
    x0 = rng.standard_normal(5)
    exact = expm(M) @ x0

    def integrate(h):
        x = x0.copy()
        for k in range(round(1 / h)):
            x = rk4_step(lambda t, y: M @ y, x, k * h, h)
        return np.linalg.norm(x - exact)

    ratio = integrate(0.01) / integrate(0.005)
    assert np.log2(ratio) >= 3.9
    assert ratio == pytest.approx(16, rel=0.05)


def test_rk4_time_argument():
    # dx/dt = t integrates exactly for quadratics
    x = rk4_step(lambda t, y: np.array([t]), np.array([0.0]), 1.0, 0.5)
    assert x[0] == pytest.approx(1.0 * 0.5 + 0.5 * 0.25, abs=1e-15)


def test_projection_into_ball():
    x = np.zeros(12)
    x[6:9] = [0.8, 0.8, 0.0]
    assert np.linalg.norm(project_state(x)[6:9]) < 1.0
    y = np.arange(12.0) / 100
    np.testing.assert_array_equal(project_state(y), y)


def test_config_validation():
    with pytest.raises(ConfigError, match="duration"):
        ScenarioConfig(duration=0.0)
    with pytest.raises(ConfigError, match="integrator_step"):
        ScenarioConfig(integrator_step=0.2)
    with pytest.raises(ConfigError, match="integrator_step"):
        ScenarioConfig(integrator_step=0.03)
    with pytest.raises(ConfigError, match="duration"):
        ScenarioConfig(duration=1.05)
    with pytest.raises(ConfigError, match="disturbance_fraction"):
        ScenarioConfig(disturbance_fraction=-0.1)


def test_docked_equilibrium_holds():
    cfg = ScenarioConfig(initial_state=RelativeState.zero())
    rec = run_closed_loop(cfg)
    assert not rec.failed
    assert np.max(np.linalg.norm(rec.x[:, :3], axis=1)) < 1e-9


def test_record_layout():
    cfg = short()
    rec = run_closed_loop(cfg)
    sub, n = cfg.grid()
    assert rec.t.size == sub * n + 1
    np.testing.assert_allclose(np.diff(rec.t), 0.01, atol=1e-12)
    assert rec.x.shape == (rec.t.size, 12) and rec.f_a.shape == (rec.t.size, 6)
    assert np.all(np.isfinite(rec.f_a)) and rec.sample_kappa.size == n
    # zero-order hold: thrust is constant within each sample interval
    blocks = rec.f_a[:-1].reshape(n, sub, 6)
    assert np.all(blocks == blocks[:, :1])
    assert rec.stability.count == n and rec.stability.violations == 0


def test_runs_are_deterministic():
    cfg = short(disturbance_fraction=0.1, seed=3, kappa_baseline_stride=5)
    a, b = run_closed_loop(cfg), run_closed_loop(cfg)
    for field in ("x", "f_a", "kappa", "det_x", "baseline_kappa"):
        np.testing.assert_array_equal(getattr(a, field), getattr(b, field))
    c = run_closed_loop(replace(cfg, seed=4))
    assert not np.array_equal(a.x, c.x)


def test_faster_poles_settle_faster():
    slow = compute_metrics(run_closed_loop(ScenarioConfig()))
    fast_cfg = ScenarioConfig(controller=ControllerConfig(poles=tuple(2 * p for p in NOMINAL_POLES)))
    fast = compute_metrics(run_closed_loop(fast_cfg))
    for c in ("px", "py", "pz", "q1", "q2", "q3"):
        assert fast["components"][c]["settling_time_s"] < slow["components"][c]["settling_time_s"]


def test_measurement_and_model_flags_run():
    for cfg in (
        short(finite_difference_velocity=True),
        short(controller=ControllerConfig(verbatim_stiffness=True)),
        short(controller=ControllerConfig(pole_hold=True)),
        short(controller=ControllerConfig(thrust_limit=10.0)),
    ):
        rec = run_closed_loop(cfg)
        assert not rec.failed
    rec = run_closed_loop(short(controller=ControllerConfig(thrust_limit=10.0)))
    assert np.max(np.abs(rec.f_a)) <= 10.0


def test_failure_yields_partial_record(monkeypatch):
    real = sim.orbit_state

    def failing(el, t, p):
        if t > 1.0:
            raise DegenerateGeometryError("forced")
        return real(el, t, p)

    monkeypatch.setattr(sim, "orbit_state", failing)
    rec = run_closed_loop(short())
    assert rec.failed and "forced" in rec.error
    assert 90 <= rec.t.size <= 110
    assert np.all(np.isfinite(rec.x))


def test_disturbance_bounds(rng):
    f = rng.normal(0, 10, 6)
    for _ in range(200):
        d = _draw_disturbance(rng, f, 0.1)
        assert np.linalg.norm(d) <= 0.1 * np.linalg.norm(f)


def test_perturbed_params(rng):
    base = nominal_params()
    spec = PerturbationSpec()
    for _ in range(50):
        p = perturbed_params(base, spec, rng)
        for J, J0 in ((p.J_c, base.J_c), (p.J_t, base.J_t)):
            np.testing.assert_array_equal(J, J.T)
            assert np.all(np.linalg.eigvalsh(J) > 0)
            assert np.max(np.abs(J - J0)) <= 1.0
        assert max(abs(p.L1 - 2), abs(p.L2 - 2), abs(p.L3 - 2)) <= 0.01
    zero = perturbed_params(base, PerturbationSpec(0.0, 0.0, 0.0), rng)
    np.testing.assert_array_equal(zero.J_c, base.J_c)
    assert (zero.L1, zero.L2, zero.L3) == (2.0, 2.0, 2.0)


def test_perturbation_validation():
    with pytest.raises(ConfigError):
        PerturbationSpec(-1.0)


def test_monte_carlo_zero_bounds_match_nominal():
    cfg = short()
    nominal = run_closed_loop(cfg)
    ens = monte_carlo(cfg, PerturbationSpec(0.0, 0.0, 0.0), 2, seed=9)
    for rec in ens.records:
        np.testing.assert_array_equal(rec.x, nominal.x)
    assert ens.summary["max_thrust_N"] == compute_metrics(nominal)["max_thrust_N"]


def test_monte_carlo_deterministic_and_worker_independent():
    cfg = short(kappa_baseline_stride=10)
    a = monte_carlo(cfg, PerturbationSpec(), 3, seed=5)
    b = monte_carlo(cfg, PerturbationSpec(), 3, seed=5, workers=2)
    assert a.summary.keys() == b.summary.keys()
    for k in ("converged_count", "failed_count", "max_thrust_N", "median_kappa", "median_kappa_random"):
        assert a.summary[k] == b.summary[k]
    np.testing.assert_array_equal(a.summary["p_envelope"]["p50"], b.summary["p_envelope"]["p50"])
    for ra, rb in zip(a.records, b.records):
        np.testing.assert_array_equal(ra.x, rb.x)
    # runs differ from one another
    assert not np.array_equal(a.records[0].x, a.records[1].x)


def test_monte_carlo_records_failures(monkeypatch):
    real = sim.orbit_state
    monkeypatch.setattr(
        sim, "orbit_state",
        lambda el, t, p: (_ for _ in ()).throw(DegenerateGeometryError("x")) if t > 0.5 else real(el, t, p),
    )
    ens = monte_carlo(short(), PerturbationSpec(), 2, seed=1)
    assert ens.summary["failed_count"] == 2 and ens.summary["converged_count"] == 0
    with pytest.raises(ValueError):
        monte_carlo(short(), PerturbationSpec(), 0, seed=1)


def test_terminal_norms():
    rec = run_closed_loop(short())
    p, q = terminal_norms(rec)
    assert p == pytest.approx(np.linalg.norm(rec.x[-1, :3]))
    assert q == pytest.approx(np.linalg.norm(rec.x[-1, 6:9]))
