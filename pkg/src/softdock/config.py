"""Scenario configuration files.

The format is one ``section.key = value`` assignment per line. Values are
JSON literals (numbers, ``true``/``false``, ``null``, lists, quoted strings);
``#`` starts a comment. All quantities are SI:

=====================================  ==========================================
key                                    meaning / unit
=====================================  ==========================================
orbit.semi_major_axis                  target semi-major axis, m
orbit.eccentricity                     dimensionless, [0, 1)
orbit.true_anomaly_0                   target true anomaly at t = 0, rad
orbit.mu                               gravitational parameter, m^3/s^2
chaser.mass                            kg
chaser.inertia                         3x3 list, kg m^2
target.inertia                         3x3 list, kg m^2
target.attitude                        scalar-first unit quaternion (inertial)
target.rate                            body rate of the target, rad/s
thrusters.lever_arms                   [L1, L2, L3], m
initial.position                       relative position p(0), m
initial.velocity                       relative velocity dp/dt(0), m/s
initial.quaternion                     relative attitude, scalar-first
initial.rate                           relative angular rate, rad/s
controller.poles                       closed-loop poles, 1/s
controller.sample_period               s
controller.pole_hold                   reuse the first gain for every sample
controller.warm_start                  seed each synthesis with the last X
controller.max_sweeps                  selection sweeps per sample
controller.initial_sweeps              selection sweeps at the first sample
controller.sweep_tol                   relative |det X| improvement to stop
controller.thrust_limit                per-thruster clip, N (null = none)
model.verbatim_stiffness               use mu/r^3 - gamma_dot in D_t
measurement.finite_difference_velocity estimate dp/dt by differencing p
sim.duration                           s
sim.integrator_step                    s
sim.disturbance_fraction               thruster disturbance / |f_a|
sim.seed                               integer RNG seed
sim.kappa_baseline_stride              random-X conditioning every N samples
perturb.inertia_entry_bound            kg m^2 (perturbation files)
perturb.lever_arm_bound                m (perturbation files)
perturb.disturbance_fraction           dimensionless (perturbation files)
=====================================  ==========================================
"""

import hashlib
import json
import re
from pathlib import Path

import numpy as np

from . import attitude
from .controller import ControllerConfig
from .dynamics import RelativeState, SpacecraftParams, TargetAttitudeState
from .errors import ConfigError, SoftdockError
from .orbit import OrbitElements
from .sim import PerturbationSpec, ScenarioConfig, nominal_initial_state, nominal_params

SCENARIO_KEYS = {
    "orbit.semi_major_axis", "orbit.eccentricity", "orbit.true_anomaly_0", "orbit.mu",
    "chaser.mass", "chaser.inertia",
    "target.inertia", "target.attitude", "target.rate",
    "thrusters.lever_arms",
    "initial.position", "initial.velocity", "initial.quaternion", "initial.rate",
    "controller.poles", "controller.sample_period", "controller.pole_hold",
    "controller.warm_start", "controller.max_sweeps", "controller.initial_sweeps",
    "controller.sweep_tol", "controller.thrust_limit",
    "model.verbatim_stiffness", "measurement.finite_difference_velocity",
    "sim.duration", "sim.integrator_step", "sim.disturbance_fraction", "sim.seed",
    "sim.kappa_baseline_stride",
}
PERTURB_KEYS = {"perturb.inertia_entry_bound", "perturb.lever_arm_bound", "perturb.disturbance_fraction"}

# ScenarioConfig / PerturbationSpec field names that map back to file keys
_FIELD_KEYS = {
    "duration": "sim.duration",
    "integrator_step": "sim.integrator_step",
    "disturbance_fraction": "sim.disturbance_fraction",
    "kappa_baseline_stride": "sim.kappa_baseline_stride",
    "inertia_entry_bound": "perturb.inertia_entry_bound",
    "lever_arm_bound": "perturb.lever_arm_bound",
}


def _strip_comment(text):
    out, in_str = [], False
    for ch in text:
        if ch == '"':
            in_str = not in_str
        elif ch == "#" and not in_str:
            break
        out.append(ch)
    return "".join(out).strip()


def parse_text(text, allowed):
    """Parse ``key = value`` lines; returns ``{key: (value, line_no)}``."""
    entries = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=no)
        key, _, value = (s.strip() for s in line.partition("="))
        if key not in allowed:
            raise ConfigError("unknown key", field=key, line=no)
        if key in entries:
            raise ConfigError("duplicate key", field=key, line=no)
        try:
            entries[key] = (json.loads(value), no)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse value {value!r} ({exc.msg})", field=key, line=no) from None
    return entries


def _getter(entries):
    def get(key, default, kind=float):
        if key not in entries:
            return default
        value, no = entries[key]
        try:
            if kind is bool:
                if not isinstance(value, bool):
                    raise TypeError("expected true or false")
                return value
            if kind is int:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise TypeError("expected an integer")
                return value
            if kind == "vec3":
                arr = np.asarray(value, dtype=float)
                if arr.shape != (3,):
                    raise TypeError("expected a list of 3 numbers")
                return arr
            if kind == "quat":
                arr = np.asarray(value, dtype=float)
                if arr.shape != (4,):
                    raise TypeError("expected a list of 4 numbers")
                return arr
            if kind == "mat3":
                arr = np.asarray(value, dtype=float)
                if arr.shape != (3, 3):
                    raise TypeError("expected a 3x3 nested list")
                return arr
            if kind == "list":
                return [float(v) for v in value]
            if kind == "optional":
                return None if value is None else float(value)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError("expected a number")
            return float(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), field=key, line=no) from None
    return get


def _line_of(entries, field_name):
    key = _FIELD_KEYS.get(field_name, field_name)
    return key, entries.get(key, (None, None))[1]


def scenario_from_entries(entries, overrides=None):
    get = _getter(entries)
    overrides = overrides or {}
    base_params = nominal_params()
    base_state = nominal_initial_state()
    try:
        orbit = OrbitElements(
            get("orbit.semi_major_axis", OrbitElements.circular(250e3).semi_major_axis),
            get("orbit.eccentricity", 0.0),
            get("orbit.true_anomaly_0", 0.0),
            get("orbit.mu", OrbitElements.circular(250e3).mu),
        )
        L = get("thrusters.lever_arms", np.array([base_params.L1, base_params.L2, base_params.L3]), "vec3")
        params = SpacecraftParams(
            get("chaser.mass", base_params.m_c),
            get("chaser.inertia", base_params.J_c, "mat3"),
            get("target.inertia", base_params.J_t, "mat3"),
            *L,
        )
        q_tb = get("target.attitude", attitude.IDENTITY.copy(), "quat")
        if abs(np.linalg.norm(q_tb) - 1.0) > 1e-3:
            raise ConfigError("quaternion norm must be within 1e-3 of 1", field="target.attitude")
        target = TargetAttitudeState(q_tb / np.linalg.norm(q_tb), get("target.rate", np.zeros(3), "vec3"))
        q_rel = get("initial.quaternion", attitude.to_full(base_state.qv), "quat")
        if abs(np.linalg.norm(q_rel) - 1.0) > 1e-3:
            raise ConfigError("quaternion norm must be within 1e-3 of 1", field="initial.quaternion")
        initial = RelativeState(
            get("initial.position", base_state.p, "vec3"),
            get("initial.velocity", base_state.r, "vec3"),
            attitude.to_reduced(q_rel),
            get("initial.rate", base_state.w, "vec3"),
        )
        ctrl = ControllerConfig(
            poles=tuple(get("controller.poles", list(ControllerConfig().poles), "list")),
            sample_period=overrides.get("sample_period", get("controller.sample_period", 0.1)),
            pole_hold=get("controller.pole_hold", False, bool),
            verbatim_stiffness=overrides.get("verbatim_stiffness") or get("model.verbatim_stiffness", False, bool),
            max_sweeps=get("controller.max_sweeps", 10, int),
            sweep_tol=get("controller.sweep_tol", 1e-6),
            warm_start=get("controller.warm_start", True, bool),
            initial_sweeps=get("controller.initial_sweeps", 10, int),
            thrust_limit=get("controller.thrust_limit", None, "optional"),
        )
        return ScenarioConfig(
            orbit=orbit,
            initial_state=initial,
            target=target,
            params=params,
            controller=ctrl,
            duration=get("sim.duration", 80.0),
            integrator_step=overrides.get("integrator_step", get("sim.integrator_step", 0.01)),
            disturbance_fraction=get("sim.disturbance_fraction", 0.0),
            seed=overrides.get("seed", get("sim.seed", 0, int)),
            finite_difference_velocity=get("measurement.finite_difference_velocity", False, bool),
            kappa_baseline_stride=get("sim.kappa_baseline_stride", 0, int),
        )
    except ConfigError as exc:
        if exc.line is None and exc.field is not None:
            key, line = _line_of(entries, exc.field)
            raise ConfigError(str(exc).split(": ", 1)[-1], field=key, line=line) from None
        raise
    except (SoftdockError, ValueError) as exc:
        raise _attribute(entries, exc) from None


_ALIASES = {"J_c": "chaser.inertia", "J_t": "target.inertia", "lever arm": "thrusters.lever_arms",
            "mass": "chaser.mass", "eccentricity": "orbit.eccentricity",
            "semi-major axis": "orbit.semi_major_axis"}


def _attribute(entries, exc):
    """ConfigError naming the key a constructor complaint refers to."""
    msg = str(exc)
    for key in sorted(SCENARIO_KEYS, key=len, reverse=True):
        if re.search(rf"\b{key.split('.')[1]}\b", msg):
            return ConfigError(msg, field=key, line=entries.get(key, (None, None))[1])
    for word, key in _ALIASES.items():
        if word in msg:
            return ConfigError(msg, field=key, line=entries.get(key, (None, None))[1])
    return ConfigError(msg)


def load_scenario(path, overrides=None):
    text = Path(path).read_text()
    return scenario_from_entries(parse_text(text, SCENARIO_KEYS), overrides)


def load_perturbation(path):
    entries = parse_text(Path(path).read_text(), PERTURB_KEYS)
    get = _getter(entries)
    try:
        return PerturbationSpec(
            get("perturb.inertia_entry_bound", 1.0),
            get("perturb.lever_arm_bound", 0.01),
            get("perturb.disturbance_fraction", 0.1),
        )
    except ConfigError as exc:
        key, line = _line_of(entries, exc.field)
        raise ConfigError(str(exc).split(": ", 1)[-1], field=key, line=line) from None


def _list(a):
    return np.asarray(a, dtype=float).tolist()


def scenario_to_dict(cfg):
    """Fully resolved configuration as plain JSON-compatible data."""
    p, c = cfg.params, cfg.controller
    return {
        "orbit.semi_major_axis": cfg.orbit.semi_major_axis,
        "orbit.eccentricity": cfg.orbit.eccentricity,
        "orbit.true_anomaly_0": cfg.orbit.true_anomaly_0,
        "orbit.mu": cfg.orbit.mu,
        "chaser.mass": p.m_c,
        "chaser.inertia": _list(p.J_c),
        "target.inertia": _list(p.J_t),
        "target.attitude": _list(cfg.target.q_i_tb),
        "target.rate": _list(cfg.target.w_tb),
        "thrusters.lever_arms": [p.L1, p.L2, p.L3],
        "initial.position": _list(cfg.initial_state.p),
        "initial.velocity": _list(cfg.initial_state.r),
        "initial.quaternion": _list(attitude.to_full(cfg.initial_state.qv)),
        "initial.rate": _list(cfg.initial_state.w),
        "controller.poles": list(c.poles),
        "controller.sample_period": c.sample_period,
        "controller.pole_hold": c.pole_hold,
        "controller.warm_start": c.warm_start,
        "controller.max_sweeps": c.max_sweeps,
        "controller.initial_sweeps": c.initial_sweeps,
        "controller.sweep_tol": c.sweep_tol,
        "controller.thrust_limit": c.thrust_limit,
        "model.verbatim_stiffness": c.verbatim_stiffness,
        "measurement.finite_difference_velocity": cfg.finite_difference_velocity,
        "sim.duration": cfg.duration,
        "sim.integrator_step": cfg.integrator_step,
        "sim.disturbance_fraction": cfg.disturbance_fraction,
        "sim.seed": cfg.seed,
        "sim.kappa_baseline_stride": cfg.kappa_baseline_stride,
    }


def perturbation_to_dict(spec):
    return {
        "perturb.inertia_entry_bound": spec.inertia_entry_bound,
        "perturb.lever_arm_bound": spec.lever_arm_bound,
        "perturb.disturbance_fraction": spec.disturbance_fraction,
    }


def digest(resolved):
    """SHA-256 of the canonical JSON encoding of a resolved config dict."""
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()


def dump_scenario(cfg):
    """Render a resolved config back to the text format."""
    lines = []
    section = None
    for key, value in scenario_to_dict(cfg).items():
        head = key.split(".")[0]
        if head != section:
            if section is not None:
                lines.append("")
            section = head
        lines.append(f"{key} = {json.dumps(value)}")
    return "\n".join(lines) + "\n"
