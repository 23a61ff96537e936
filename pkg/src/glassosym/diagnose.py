"""Measurements of how far a glasso fit is from a usable symmetric estimate."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GlassoError, NotPositiveDefinite
from .glasso import duality_gap
from .linalg import (
    EigenSummary,
    cholesky,
    condition_number,
    eig_general,
    eig_symmetric,
    invert_spd,
    sup_norm,
)
from .models import two_by_two_fixture
from .repair import Graph, graph_from_upper

SCHEMA = "v1"
EIGEN_CAP = 200


@dataclass
class ErrMatrix:
    entries: np.ndarray
    convention_zero_count: int

    @property
    def p(self):
        return self.entries.shape[0]

    def max_finite(self):
        fin = self.entries[np.isfinite(self.entries)]
        return float(fin.max(initial=0.0))

    def to_dict(self):
        return {
            "p": self.p,
            "entries": [[_num(v) for v in row] for row in self.entries],
            "convention_zero_count": self.convention_zero_count,
        }


def err_matrix(omega):
    """Percent relative gap between each entry and its mirror.

    ``100 |(w_ij - w_ji) / w_ij|``; 0 when both entries vanish, inf when only
    ``w_ij`` does.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {omega.shape}")
    diff = omega - omega.T
    err = np.zeros_like(omega)
    nz = omega != 0.0
    err[nz] = 100.0 * np.abs(diff[nz] / omega[nz])
    err[~nz & (omega.T != 0.0)] = math.inf
    both = ~nz & (omega.T == 0.0)
    np.fill_diagonal(both, False)
    return ErrMatrix(err, int(both.sum()))


@dataclass
class EdgeDiff:
    e1: Graph
    e2: Graph
    sym_diff_count: int

    def to_dict(self):
        return {
            "e1": [list(e) for e in self.e1.sorted_edges()],
            "e2": [list(e) for e in self.e2.sorted_edges()],
            "sym_diff_count": self.sym_diff_count,
        }


def edge_sets(omega, eps=0.0):
    """Edge sets read from the upper (E1) and lower (E2) triangles."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    omega = np.asarray(omega, dtype=float)
    e1 = graph_from_upper(omega, eps)
    e2 = graph_from_upper(omega.T, eps)
    return EdgeDiff(e1, e2, len(e1.edges ^ e2.edges))


def symmetry_sup(omega):
    return sup_norm(omega - omega.T)


def dual_feasibility_residual(sigma, S, lam):
    """How far the off-diagonal of ``sigma`` sits outside the box around ``S``."""
    p = sigma.shape[0]
    off = ~np.eye(p, dtype=bool)
    gap = np.abs(sigma - S)[off]
    return float(max(0.0, gap.max(initial=0.0) - lam))


def diag_residual(sigma, S, lam):
    return float(np.max(np.abs(np.diag(sigma) - np.diag(S) - lam)))


def kkt_residual(omega, S, lam):
    """Largest violation of the stationarity conditions of the penalized likelihood."""
    cholesky(omega)
    g = invert_spd(omega) - S
    nz = omega != 0.0
    res_nz = np.abs(g[nz] - lam * np.sign(omega[nz]))
    res_z = np.maximum(np.abs(g[~nz]) - lam, 0.0)
    return float(max(res_nz.max(initial=0.0), res_z.max(initial=0.0)))


def divergence_bound(sigma_hat):
    """1 / (p * smallest eigenvalue): a lower bound on max|omega| for the fit."""
    cholesky(sigma_hat)
    ev = eig_symmetric(sigma_hat)
    lo = ev.min_real_symmetric
    if lo <= 0.0:
        raise NotPositiveDefinite("smallest eigenvalue is not positive")
    return 1.0 / (sigma_hat.shape[0] * lo)


def tolerance_gap_demo(t):
    """Sup-norm errors of a near-optimal dual point and its inverse.

    ``W_t = diag(1 + 1e-6, (1 + 1/t) 1e-6)`` is within ``1e-6 / t`` of the
    2x2 optimum while its inverse misses by ``1e6 / (t + 1)``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    fx = two_by_two_fixture()
    W = np.diag([1.0 + fx.lam, (1.0 + 1.0 / t) * fx.lam])
    W_inv = np.diag(1.0 / np.diag(W))
    return sup_norm(W - fx.sigma_hat), sup_norm(W_inv - fx.omega_hat)


@dataclass
class DiagnosticsReport:
    p: int
    lam: float
    err: ErrMatrix | None = None
    edge_diff: EdgeDiff | None = None
    symmetry_sup: float | None = None
    eigen: EigenSummary | str | None = None
    dual_feasibility_residual: float | None = None
    diag_residual: float | None = None
    kkt_residual: float | None = None
    duality_gap: float | None = None
    condition_number: float | None = None
    divergence_bound: float | None = None
    symmetrized: bool = False
    errors: dict = field(default_factory=dict)

    def to_dict(self):
        eig = self.eigen
        if isinstance(eig, EigenSummary):
            eig = eig.to_dict()
        return _jsonable({
            "schema": SCHEMA,
            "p": self.p,
            "lambda": self.lam,
            "err": self.err.to_dict() if self.err else None,
            "edge_diff": self.edge_diff.to_dict() if self.edge_diff else None,
            "symmetry_sup": self.symmetry_sup,
            "eigen": eig,
            "dual_feasibility_residual": self.dual_feasibility_residual,
            "diag_residual": self.diag_residual,
            "kkt_residual": self.kkt_residual,
            "duality_gap": self.duality_gap,
            "condition_number": self.condition_number,
            "divergence_bound": self.divergence_bound,
            "primal_on_symmetrized": self.symmetrized,
            "errors": self.errors,
        })


def full_report(fit, S):
    """Every diagnostic for ``fit``; a failing field is recorded, not raised."""
    S = np.asarray(S, dtype=float)
    raw, sigma, lam = fit.omega_raw, fit.sigma_hat, fit.lam
    rep = DiagnosticsReport(p=fit.p, lam=lam)
    sym = 0.5 * (raw + raw.T)
    rep.symmetrized = bool(np.any(raw != raw.T))

    def grab(name, fn):
        try:
            setattr(rep, name, fn())
        except (GlassoError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            rep.errors[name] = f"{type(exc).__name__}: {exc}"

    grab("err", lambda: err_matrix(raw))
    grab("edge_diff", lambda: edge_sets(raw))
    grab("symmetry_sup", lambda: symmetry_sup(raw))
    grab("eigen", lambda: eig_general(raw) if fit.p <= EIGEN_CAP else "skipped")
    grab("dual_feasibility_residual", lambda: dual_feasibility_residual(sigma, S, lam))
    grab("diag_residual", lambda: diag_residual(sigma, S, lam))
    grab("kkt_residual", lambda: kkt_residual(sym, S, lam))
    grab("duality_gap", lambda: duality_gap(sym, S, lam))
    grab("condition_number", lambda: condition_number(sigma))
    grab("divergence_bound", lambda: divergence_bound(sigma))
    return rep


def _num(v):
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj
