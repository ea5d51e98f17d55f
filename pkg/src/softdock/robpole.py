"""Robust pole assignment by cyclic eigenvector selection.

Given ``(A, B)`` and distinct real closed-loop poles, the gain ``K`` is built
from an eigenvector matrix ``X`` whose columns are chosen, one at a time, from
the admissible subspaces ``S_i = {x : Q1^T (A - lambda_i I) x = 0}`` so as to
maximise ``|det X|`` over unit-norm columns. A large ``|det X|`` keeps ``X``
well conditioned, which bounds both eigenvalue sensitivity and the gain from
disturbances to the state.

The procedure:

1. ``B = [Q0 Q1] [R; 0]`` (independent of ``A``; may be reused).
2. For each pole, an orthonormal basis of ``S_i`` from a QR factorisation of
   ``(A^T - lambda_i I) Q1``.
3. Cyclic sweeps: each column is replaced by the unit vector of ``S_i`` that
   maximises ``|det X|`` with the other columns fixed.
4. ``K = R^-1 Q0^T (X Lambda X^-1 - A)``.

With a single input the eigenvectors are fixed by the poles and ``K`` is
unique, but ``X`` can be very ill conditioned even when ``K`` is not. In that
case the gain comes from the transfer-function identity
``det(sI - A - bK) = det(sI - A) (1 - K (sI - A)^-1 b)`` evaluated at points
on a circle enclosing both spectra, which never inverts ``X``.

Only real, distinct poles are supported.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .errors import (
    DegenerateSelectionError,
    IllConditionedSelectionError,
    InfeasibleAssignmentError,
    InputMatrixError,
)

RANK_RTOL = 1e-10
MAX_COND = 1e12


class InputFactors(NamedTuple):
    Q0: np.ndarray
    Q1: np.ndarray
    R: np.ndarray


@dataclass(frozen=True, eq=False)
class GainResult:
    K: np.ndarray
    X: np.ndarray
    det_X: float
    log_abs_det: float
    kappa: float
    residual: float
    sweeps: int = 0
    det_history: list = field(default_factory=list)


def validate_poles(poles):
    """Return poles as a float array, rejecting complex, repeated or unstable values."""
    arr = np.asarray(poles)
    if np.iscomplexobj(arr):
        if np.any(arr.imag != 0):
            raise ValueError("only real poles are supported")
        arr = arr.real
    arr = np.asarray(arr, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("pole set is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("poles must be finite")
    if np.any(arr >= 0.0):
        raise ValueError("poles must be strictly negative")
    if np.unique(arr).size != arr.size:
        raise ValueError("poles must be distinct")
    return arr


def decompose_input_matrix(B):
    """QR split of ``B`` into range basis ``Q0``, complement ``Q1`` and triangular ``R``."""
    B = np.asarray(B, dtype=float)
    n, m = B.shape
    if m > n:
        raise InputMatrixError("B has more columns than rows")
    Q, Rfull = np.linalg.qr(B, mode="complete")
    R = Rfull[:m]
    d = np.abs(np.diag(R))
    scale = max(np.linalg.norm(B, 2), np.finfo(float).tiny)
    if m and d.min() <= RANK_RTOL * scale:
        raise InputMatrixError("B does not have full column rank")
    return InputFactors(Q[:, :m], Q[:, m:], R)


def _subspace_check(Y, lam):
    d = np.abs(np.diagonal(Y, axis1=-2, axis2=-1))
    if d.min() <= RANK_RTOL * max(d.max(), 1.0):
        raise InfeasibleAssignmentError(
            f"pole {lam} is not assignable: it is an uncontrollable mode of (A, B)"
        )


def candidate_subspace(A, lam, Q1):
    """Orthonormal basis (n x m) of the admissible eigenvector subspace for ``lam``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    k = Q1.shape[1]
    if k == 0:
        return np.eye(n)
    M = (A.T - lam * np.eye(n)) @ Q1
    V, Y = np.linalg.qr(M, mode="complete")
    _subspace_check(Y, lam)
    return V[:, k:]


def candidate_subspaces(A, poles, Q1):
    """All admissible subspaces at once; same result as looping ``candidate_subspace``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    k = Q1.shape[1]
    if k == 0:
        return [np.eye(n) for _ in poles]
    AtQ1 = A.T @ Q1
    M = AtQ1[None, :, :] - np.asarray(poles)[:, None, None] * Q1[None, :, :]
    V, Y = np.linalg.qr(M, mode="complete")
    for lam, Yi in zip(poles, Y):
        _subspace_check(Yi, lam)
    return list(V[:, :, k:])


def _complement(X, i):
    """Unit vector orthogonal to every column of ``X`` except column ``i``."""
    others = np.delete(X, i, axis=1)
    Q, _ = np.linalg.qr(others, mode="complete")
    return Q[:, -1]


def _log_abs_det(X):
    sign, logdet = np.linalg.slogdet(X)
    return logdet if sign != 0 else -np.inf


# below this log|det X| the inverse is unreliable and sweeps use QR complements
_LOGDET_FLOOR = -20.0


def _sweep_qr(X, bases):
    for i, S in enumerate(bases):
        if S is None:
            continue
        y = _complement(X, i)
        proj = S @ (S.T @ y)
        norm = np.linalg.norm(proj)
        if norm > 1e-14:
            X[:, i] = proj / norm


def _sweep_inverse(X, bases):
    # row i of X^-1 is orthogonal to every column but i; X^-1 follows the
    # column replacements through rank-one updates
    Xinv = np.linalg.inv(X)
    for i, S in enumerate(bases):
        if S is None:
            continue
        proj = S @ (S.T @ Xinv[i])
        norm = np.linalg.norm(proj)
        if norm <= 1e-14:
            continue
        x_new = proj / norm
        Xu = Xinv @ (x_new - X[:, i])
        Xinv -= np.outer(Xu, Xinv[i]) / (1.0 + Xu[i])
        X[:, i] = x_new


def initial_selection(bases, X0=None):
    """Starting columns: the projection of ``X0`` onto each subspace when given,
    otherwise (or when the projection vanishes) the first basis vector."""
    cols = []
    for i, S in enumerate(bases):
        v = S[:, 0]
        if X0 is not None:
            proj = S @ (S.T @ X0[:, i])
            norm = np.linalg.norm(proj)
            if norm > 1e-8:
                v = proj / norm
        cols.append(np.asarray(v, dtype=float))
    return np.column_stack(cols)


def select_eigenvectors(bases, max_sweeps=10, tol=1e-6, X0=None):
    """Cyclic column-by-column maximisation of ``|det X|``.

    Returns ``(X, history)`` where ``history[k]`` is ``log|det X|`` after
    sweep ``k`` (``history[0]`` is the initial guess). ``X0`` warm-starts the
    selection, typically with the previous solution of a slowly varying plant.
    """
    n = len(bases)
    X = initial_selection(bases, X0)
    if X.shape != (n, n):
        raise ValueError("need n subspaces of dimension n")
    history = [_log_abs_det(X)]
    # a one-dimensional subspace fixes its column up to sign
    bases = [S if S.shape[1] > 1 else None for S in bases]
    if all(S is None for S in bases):
        if not np.isfinite(history[-1]):
            raise DegenerateSelectionError("eigenvector selection is singular")
        return X, history
    log_tol = np.log1p(tol)
    for _ in range(max_sweeps):
        if history[-1] > _LOGDET_FLOOR:
            _sweep_inverse(X, bases)
        else:
            _sweep_qr(X, bases)
        history.append(_log_abs_det(X))
        prev, cur = history[-2], history[-1]
        if np.isfinite(prev) and cur - prev < log_tol:
            break
    if not np.isfinite(history[-1]):
        raise DegenerateSelectionError("eigenvector selection stayed singular")
    return X, history


def compute_gain(A, Q0, R, X, poles):
    """``K = R^-1 Q0^T (X Lambda X^-1 - A)``."""
    cond = np.linalg.cond(X)
    if not np.isfinite(cond) or cond > MAX_COND:
        raise IllConditionedSelectionError(f"eigenvector matrix condition number {cond:.3g}")
    M = np.linalg.solve(X.T, (X * poles).T).T
    return sla.solve_triangular(R, Q0.T @ (M - A))


def single_input_gain(A, b, poles):
    """Unique gain for one input by least-squares interpolation of the
    closed-loop characteristic polynomial on a circle."""
    n = A.shape[0]
    b = np.asarray(b, dtype=float).reshape(n)
    eig_a = np.linalg.eigvals(A)
    rho = 1.5 * max(np.max(np.abs(eig_a)), np.max(np.abs(poles)), 1e-3)
    npts = 2 * n
    s = rho * np.exp(2j * np.pi * (np.arange(npts) + 0.5) / npts)
    V = np.array([np.linalg.solve(sj * np.eye(n) - A, b) for sj in s])
    rhs = np.array([1.0 - np.prod((sj - poles) / (sj - eig_a)) for sj in s])
    M = np.vstack([V.real, V.imag])
    K, _, rank, _ = np.linalg.lstsq(M, np.concatenate([rhs.real, rhs.imag]), rcond=None)
    if rank < n:
        raise InfeasibleAssignmentError("single-input pair is not controllable")
    return K.reshape(1, n)


def eigenstructure_residual(A, B, K, X, poles):
    """Relative Frobenius residual ``||(A+BK)X - X Lambda|| / (||A|| + ||BK||)``."""
    BK = B @ K
    num = np.linalg.norm((A + BK) @ X - X * poles)
    den = np.linalg.norm(A) + np.linalg.norm(BK)
    return num / den if den > 0.0 else num


def assign_poles(A, B, poles, factors=None, max_sweeps=10, tol=1e-6, X0=None):
    """Robust state-feedback gain placing the eigenvalues of ``A + B K`` at ``poles``.

    ``factors`` may carry a precomputed ``decompose_input_matrix(B)``; ``X0``
    is an optional warm start for the eigenvector selection.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    poles = validate_poles(poles)
    n = A.shape[0]
    if poles.size != n:
        raise ValueError(f"need {n} poles, got {poles.size}")
    if factors is None:
        factors = decompose_input_matrix(B)
    bases = candidate_subspaces(A, poles, factors.Q1)
    X, history = select_eigenvectors(bases, max_sweeps=max_sweeps, tol=tol, X0=X0)
    if B.shape[1] == 1:
        K = single_input_gain(A, B, poles)
    else:
        K = compute_gain(A, factors.Q0, factors.R, X, poles)
    s = np.linalg.svd(X, compute_uv=False)
    sign, logdet = np.linalg.slogdet(X)
    return GainResult(
        K=K,
        X=X,
        det_X=float(sign * np.exp(logdet)),
        log_abs_det=float(logdet),
        kappa=float(s[0] / s[-1]),
        residual=float(eigenstructure_residual(A, B, K, X, poles)),
        sweeps=len(history) - 1,
        det_history=history,
    )


def random_admissible_selection(A, B, poles, rng, factors=None):
    """Eigenvector matrix with each column a random unit vector of its subspace."""
    poles = validate_poles(poles)
    if factors is None:
        factors = decompose_input_matrix(B)
    cols = []
    for S in candidate_subspaces(A, poles, factors.Q1):
        g = rng.standard_normal(S.shape[1])
        if S.shape[1] == 1:
            cols.append(np.copysign(1.0, g[0]) * S[:, 0])
            continue
        v = S @ g
        cols.append(v / np.linalg.norm(v))
    return np.column_stack(cols)


def condition_number(X):
    s = np.linalg.svd(X, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else np.inf
