"""Trajectory metrics: overshoot, zero crossings, settling time, peak thrust."""

import numpy as np

from .dynamics import P, Q, R, W

COMPONENTS = ("px", "py", "pz", "rx", "ry", "rz", "q1", "q2", "q3", "wx", "wy", "wz")
DEFAULT_BANDS = {"p": 0.05, "r": 0.05, "q": 0.01, "w": 0.01}


def overshoot_ratio(series):
    """Largest excursion to the far side of zero, relative to the initial magnitude.

    The "near" side is the sign of the first nonzero sample. A series that
    starts at zero is measured against its peak magnitude.
    """
    s = np.asarray(series, dtype=float)
    nz = np.flatnonzero(s)
    if nz.size == 0:
        return 0.0
    sign = np.sign(s[nz[0]])
    ref = abs(s[0]) if s[0] != 0.0 else np.max(np.abs(s))
    beyond = max(0.0, np.max(-sign * s))
    with np.errstate(over="ignore"):  # subnormal start: the ratio is inf
        return float(np.float64(beyond) / ref)


def zero_crossings(series):
    """Number of sign changes, ignoring exact zeros."""
    s = np.sign(np.asarray(series, dtype=float))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def settling_time(t, series, band):
    """First time after which ``|series|`` stays within ``band``; None if never."""
    outside = np.flatnonzero(np.abs(series) > band)
    if outside.size == 0:
        return float(t[0])
    last = outside[-1]
    if last + 1 >= len(t):
        return None
    return float(t[last + 1])


def _band_for(i, bands):
    for key, sl in (("p", P), ("r", R), ("q", Q), ("w", W)):
        if sl.start <= i < sl.stop:
            return bands[key]
    raise IndexError(i)


def compute_metrics(record, settle_band=None):
    """Summary metrics of a TrajectoryRecord as a JSON-friendly dict."""
    if record.t.size == 0:
        raise ValueError("empty record")
    bands = dict(DEFAULT_BANDS)
    if settle_band:
        bands.update(settle_band)
    t, x = record.t, record.x
    comps = {}
    for i, name in enumerate(COMPONENTS):
        s = x[:, i]
        comps[name] = {
            "overshoot": overshoot_ratio(s),
            "zero_crossings": zero_crossings(s),
            "settling_time_s": settling_time(t, s, _band_for(i, bands)),
        }
    f = record.f_a[np.all(np.isfinite(record.f_a), axis=1)]
    x_end = x[-1]
    return {
        "components": comps,
        "max_thrust_N": float(np.max(np.abs(f))) if f.size else None,
        "max_thrust_per_thruster_N": np.max(np.abs(f), axis=0).tolist() if f.size else None,
        "terminal_p_norm_m": float(np.linalg.norm(x_end[P])),
        "terminal_q_norm": float(np.linalg.norm(x_end[Q])),
        "max_qv_norm": float(np.max(np.linalg.norm(x[:, Q], axis=1))),
        "max_re_eig": float(record.stability.max_real),
        "sup_norm_A_closed": float(record.stability.sup_norm),
        "max_eig_error": float(np.nanmax(record.sample_eig_error)) if record.stability.count else None,
        "max_residual": float(np.nanmax(record.sample_residual)) if record.stability.count else None,
        "median_kappa": float(np.nanmedian(record.sample_kappa)) if record.stability.count else None,
        "held_steps": int(record.held_steps),
        "failed": bool(record.failed),
        "error": record.error,
        "duration_s": float(t[-1]),
        "settle_bands": bands,
    }
