"""Sampled re-synthesis controller.

At every sampling instant the plant is re-linearised around the measured
state, the known offset ``n_d`` is cancelled by feedforward thrust, and a
fresh robust pole-assignment gain closes the loop on the remainder:

    f_a = G^+ [n_t; n_r] + K(t) x
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .allocation import feedforward
from .dynamics import assemble_plant, input_matrix, state_vector
from .errors import AssignmentError
from .robpole import assign_poles, decompose_input_matrix, validate_poles

log = logging.getLogger(__name__)

NOMINAL_POLES = (-0.1, -0.2, -0.15, -0.25, -0.3, -0.35, -0.4, -0.45, -0.5, -0.55, -0.6, -0.65)


@dataclass(frozen=True)
class ControllerConfig:
    poles: tuple = NOMINAL_POLES
    sample_period: float = 0.1
    pole_hold: bool = False
    verbatim_stiffness: bool = False
    max_sweeps: int = 10
    sweep_tol: float = 1e-6
    warm_start: bool = True
    initial_sweeps: int = 10
    thrust_limit: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "poles", tuple(float(p) for p in validate_poles(self.poles)))
        if not self.sample_period > 0.0:
            raise ValueError("sample_period must be positive")
        if self.thrust_limit is not None and not self.thrust_limit > 0.0:
            raise ValueError("thrust_limit must be positive")


@dataclass(frozen=True)
class StabilityReport:
    max_real: float
    norm: float
    passed: bool
    eigenvalues: np.ndarray = None


@dataclass(frozen=True, eq=False)
class ControlCommand:
    f_a: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    gain: object
    plant: object
    A_closed: np.ndarray
    stability: StabilityReport
    held: bool = False


def pointwise_stability_check(A_closed, mu_margin):
    """Largest eigenvalue real part and spectral norm of a frozen closed-loop matrix."""
    eig = np.linalg.eigvals(A_closed)
    max_real = float(np.max(eig.real))
    return StabilityReport(
        max_real, float(np.linalg.norm(A_closed, 2)), max_real <= -mu_margin, eig
    )


@dataclass
class StabilityLog:
    """Run-long aggregate of pointwise stability reports."""

    max_real: float = -np.inf
    sup_norm: float = 0.0
    violations: int = 0
    count: int = 0

    def add(self, report):
        self.max_real = max(self.max_real, report.max_real)
        self.sup_norm = max(self.sup_norm, report.norm)
        self.violations += not report.passed
        self.count += 1


@dataclass
class Controller:
    """One controller instance per simulation run; not thread-safe."""

    params: object
    alloc: object
    cfg: ControllerConfig = field(default_factory=ControllerConfig)

    def __post_init__(self):
        self.B = input_matrix(self.params, self.alloc)
        self.factors = decompose_input_matrix(self.B)
        self.poles = np.asarray(self.cfg.poles)
        self.margin = -float(np.max(self.poles))
        self.last_gain = None
        self.failures = 0

    def step(self, state, orbit, target):
        x = state_vector(state)
        plant = assemble_plant(
            x, orbit, target, self.params, self.alloc, B=self.B,
            verbatim_stiffness=self.cfg.verbatim_stiffness,
        )
        u1 = feedforward(plant.n_t, plant.n_r, self.alloc)
        held = False
        if self.cfg.pole_hold and self.last_gain is not None:
            gain = self.last_gain
        else:
            try:
                first = self.last_gain is None
                X0 = None if first or not self.cfg.warm_start else self.last_gain.X
                gain = assign_poles(
                    plant.A, self.B, self.poles, factors=self.factors,
                    max_sweeps=self.cfg.initial_sweeps if first else self.cfg.max_sweeps,
                    tol=self.cfg.sweep_tol, X0=X0,
                )
            except AssignmentError:
                if self.last_gain is None:
                    raise
                log.warning("pole assignment failed; holding previous gain")
                self.failures += 1
                gain = self.last_gain
                held = True
        self.last_gain = gain
        u2 = gain.K @ x
        f_a = u1 + u2
        if self.cfg.thrust_limit is not None:
            f_a = np.clip(f_a, -self.cfg.thrust_limit, self.cfg.thrust_limit)
        A_closed = plant.A + self.B @ gain.K
        report = pointwise_stability_check(A_closed, self.margin - 1e-6)
        return ControlCommand(f_a, u1, u2, gain, plant, A_closed, report, held)


def controller_step(state, orbit, target, params, alloc, cfg=None):
    """Single stateless synthesis step; see :class:`Controller` for repeated use."""
    return Controller(params, alloc, cfg or ControllerConfig()).step(state, orbit, target)
