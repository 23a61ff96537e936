"""The graphical lasso as published: block coordinate ascent on the covariance
iterate ``W`` followed by the closed-form, column-by-column construction of the
concentration estimate.

The concentration matrix returned in ``GlassoFit.omega_raw`` is assembled from
per-column quantities recorded during the final sweep, each computed against
the iterate ``W`` as it stood right after that column's update. Columns
``1..p-1`` therefore invert stale iterates and the result is generally not
symmetric. That defect is reproduced deliberately; see ``repair`` for fixes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LambdaZeroWithSingularS, NoConvergence, NotPositiveDefinite
from .lasso import coordinate_descent
from .linalg import as_square, check_symmetric, cholesky, logdet_spd


@dataclass
class GlassoConfig:
    lam: float
    outer_tol: float = 1e-4
    max_sweeps: int = 1000
    inner_tol: float = 1e-7
    inner_max_iter: int | None = None  # default 100 * p
    trace: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.outer_tol <= 0 or self.inner_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")


@dataclass
class ColumnRecord:
    """What the final-sweep update of one column leaves behind."""

    beta: np.ndarray
    w_col: np.ndarray  # w_{-j,j} right after the update
    theta_diag: float


@dataclass
class SweepTrace:
    W: np.ndarray
    columns: list
    mean_change: float


@dataclass
class GlassoFit:
    sigma_hat: np.ndarray
    omega_raw: np.ndarray
    lam: float
    sweeps: int
    converged: bool
    trace: list | None = None
    inner_failures: int = 0
    betas: np.ndarray | None = field(default=None, repr=False)

    @property
    def p(self):
        return self.sigma_hat.shape[0]


def _assemble_theta(p, columns):
    # O(p^2): one scaled copy of beta per column, no inversion
    theta = np.zeros((p, p))
    for j, rec in enumerate(columns):
        idx = np.arange(p) != j
        theta[j, j] = rec.theta_diag
        theta[idx, j] = 0.0 - rec.beta * rec.theta_diag
    return theta


def fit(S, cfg, w_init=None, beta_init=None):
    """Run the graphical lasso on covariance ``S`` with settings ``cfg``.

    ``w_init`` / ``beta_init`` warm start the sweep (used by lambda-grid
    sweeps); the diagonal of ``W`` is always reset to ``diag(S) + lam``.
    Raises NoConvergence with the partial fit attached when ``max_sweeps`` is
    exhausted.
    """
    S = as_square(S, "S")
    check_symmetric(S, "S")
    if np.any(np.diag(S) < 0):
        raise ValueError("S must have a nonnegative diagonal")
    lam = float(cfg.lam)
    p = S.shape[0]
    if lam == 0.0:
        try:
            cholesky(S)
        except NotPositiveDefinite:
            raise LambdaZeroWithSingularS(
                "lambda = 0 requires a positive definite S; the penalized problem "
                "has no solution otherwise"
            ) from None

    if p == 1:
        w = S[0, 0] + lam
        return GlassoFit(np.array([[w]]), np.array([[1.0 / w]]), lam, 0, True,
                         [] if cfg.trace else None)

    W = S.copy() if w_init is None else np.array(w_init, dtype=float)
    W[np.diag_indices(p)] = np.diag(S) + lam
    betas = np.zeros((p, p - 1)) if beta_init is None else np.array(beta_init, dtype=float)
    inner_max = cfg.inner_max_iter or 100 * p

    off = ~np.eye(p, dtype=bool)
    scale = np.mean(np.abs(S[off]))
    threshold = cfg.outer_tol * scale if scale > 0 else cfg.outer_tol

    trace = [] if cfg.trace else None
    inner_failures = 0
    converged = False
    columns = []
    sweep = 0
    for sweep in range(1, cfg.max_sweeps + 1):
        W_prev = W.copy()
        columns = []
        for j in range(p):
            idx = np.arange(p) != j
            Q = np.ascontiguousarray(W[np.ix_(idx, idx)])
            b = np.ascontiguousarray(S[idx, j])
            beta = betas[j]
            _, ok, _ = coordinate_descent(Q, b, lam, beta, cfg.inner_tol, inner_max)
            inner_failures += not ok
            w12 = Q @ beta
            W[idx, j] = w12
            W[j, idx] = w12
            columns.append(ColumnRecord(beta.copy(), w12, 1.0 / (W[j, j] - w12 @ beta)))
        change = float(np.mean(np.abs(W[off] - W_prev[off])))
        if trace is not None:
            trace.append(SweepTrace(W.copy(), columns, change))
        if change <= threshold:
            converged = True
            break

    try:
        cholesky(W)
    except NotPositiveDefinite as exc:
        raise NotPositiveDefinite(f"final covariance iterate lost positive definiteness: {exc}") from None
    result = GlassoFit(
        sigma_hat=W,
        omega_raw=_assemble_theta(p, columns),
        lam=lam,
        sweeps=sweep,
        converged=converged,
        trace=trace,
        inner_failures=inner_failures,
        betas=betas,
    )
    if not converged:
        raise NoConvergence(
            f"glasso did not converge in {cfg.max_sweeps} sweeps", iterations=sweep, partial=result
        )
    return result


def glasso(S, lam, **kwargs):
    return fit(S, GlassoConfig(lam=lam, **kwargs))


def l1_norm(omega):
    return float(np.sum(np.abs(omega)))


def primal_objective(omega, S, lam):
    """log det(omega) - tr(S omega) - lam * |omega|_1, to be maximized."""
    return logdet_spd(omega) - float(np.sum(S * omega)) - lam * l1_norm(omega)


def dual_objective(sigma):
    """log det(sigma), maximized over the box |sigma - S| <= lam."""
    return logdet_spd(sigma)


def duality_gap(omega, S, lam):
    """tr(S omega) + lam * |omega|_1 - p; zero at the joint optimum."""
    cholesky(omega)
    return float(np.sum(S * omega)) + lam * l1_norm(omega) - omega.shape[0]
