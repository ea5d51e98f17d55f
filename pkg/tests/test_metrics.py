import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from softdock.metrics import compute_metrics, overshoot_ratio, settling_time, zero_crossings
from softdock.sim import ScenarioConfig, run_closed_loop


def test_monotone_decay():
    s = 10 * np.exp(-np.linspace(0, 5, 100))
    assert overshoot_ratio(s) == 0.0
    assert zero_crossings(s) == 0


def test_constructed_overshoot():
    s = np.array([10.0, 5.0, 0.0, -0.5, -1.0, -0.5, 0.0])
    assert overshoot_ratio(s) == pytest.approx(0.1)
    assert zero_crossings(s) == 1


def test_zero_crossings_ignore_exact_zeros():
    assert zero_crossings(np.array([1.0, 0.0, 0.0, 1.0])) == 0
    assert zero_crossings(np.array([1.0, -1.0, 1.0, -1.0])) == 3
    assert zero_crossings(np.zeros(5)) == 0


def test_settling_time():
    t = np.arange(6.0)
    assert settling_time(t, np.array([5.0, 2.0, 0.5, 0.01, 0.02, 0.0]), 0.05) == 3.0
    assert settling_time(t, np.full(6, 0.01), 0.05) == 0.0
    assert settling_time(t, np.array([0.0, 0.0, 0.0, 0.0, 0.0, 1.0]), 0.05) is None


@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=50))
def test_metric_ranges(values):
    s = np.array(values)
    assert overshoot_ratio(s) >= 0.0
    assert 0 <= zero_crossings(s) <= s.size - 1


@given(st.floats(0.1, 100), st.floats(0.01, 1.0))
def test_overshoot_scale_invariant(a, k):
    s = np.array([1.0, 0.2, -k, 0.0])
    assert overshoot_ratio(a * s) == pytest.approx(overshoot_ratio(s))


def test_compute_metrics_recomputable():
    rec = run_closed_loop(ScenarioConfig(duration=5.0))
    m = compute_metrics(rec)
    assert m["max_thrust_N"] == pytest.approx(np.abs(rec.f_a).max())
    assert m["terminal_p_norm_m"] == pytest.approx(np.linalg.norm(rec.x[-1, :3]))
    assert m["components"]["px"]["zero_crossings"] == zero_crossings(rec.x[:, 0])
    assert m["duration_s"] == pytest.approx(5.0)
    assert set(m["components"]) == {"px", "py", "pz", "rx", "ry", "rz", "q1", "q2", "q3", "wx", "wy", "wz"}
    wide = compute_metrics(rec, {"p": 100.0})
    assert wide["components"]["px"]["settling_time_s"] == 0.0
