"""Dense real matrix routines: factorizations, eigenvalues, norms, CSV I/O.

Matrices are plain ``numpy.ndarray`` objects of shape ``(p, p)``. The
factorizations and eigen solvers are written out here rather than delegated
to LAPACK so that their failure modes (non-positive pivots, iteration caps)
surface as the package's own exceptions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NotPositiveDefinite, NotSymmetric

EPS = np.finfo(float).eps
QR_STEPS_PER_DIM = 50


def as_square(a, name="matrix"):
    """Return ``a`` as a finite float ``(p, p)`` array, raising ValueError otherwise."""
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return a


def symmetry_tolerance(a):
    return 1e-12 * (1.0 + np.max(np.abs(a)))


def is_symmetric(a, tol=None):
    a = np.asarray(a, dtype=float)
    if tol is None:
        tol = symmetry_tolerance(a)
    return bool(np.max(np.abs(a - a.T)) <= tol)


def check_symmetric(a, name="matrix"):
    if not is_symmetric(a):
        dev = np.max(np.abs(a - a.T))
        raise NotSymmetric(f"{name} is not symmetric (max |A - A^T| = {dev:.3e})")


# ---------------------------------------------------------------------------
# Cholesky and friends
# ---------------------------------------------------------------------------

def cholesky(a):
    """Lower-triangular ``L`` with ``L @ L.T == a``.

    Raises NotSymmetric for asymmetric input and NotPositiveDefinite as soon
    as a pivot is not strictly positive.
    """
    a = as_square(a)
    check_symmetric(a)
    p = a.shape[0]
    L = np.zeros_like(a)
    for j in range(p):
        row = L[j, :j]
        pivot = a[j, j] - row @ row
        if not pivot > 0.0:
            raise NotPositiveDefinite(f"non-positive pivot {pivot:.3e} at index {j}")
        d = math.sqrt(pivot)
        L[j, j] = d
        if j + 1 < p:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ row) / d
    return L


def is_positive_definite(a):
    try:
        cholesky(a)
    except (NotPositiveDefinite, NotSymmetric):
        return False
    return True


def forward_substitution(L, b):
    b = np.asarray(b, dtype=float)
    y = np.zeros_like(b)
    for i in range(L.shape[0]):
        y[i] = (b[i] - L[i, :i] @ y[:i]) / L[i, i]
    return y


def back_substitution(U, b):
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b)
    for i in range(U.shape[0] - 1, -1, -1):
        x[i] = (b[i] - U[i, i + 1:] @ x[i + 1:]) / U[i, i]
    return x


def solve_spd(a, b):
    L = cholesky(a)
    return back_substitution(L.T, forward_substitution(L, b))


def invert_spd(a):
    """Inverse of a symmetric positive definite matrix via two triangular solves.

    The result is symmetrized as ``(B + B.T) / 2`` to remove rounding drift.
    """
    L = cholesky(a)
    eye = np.eye(L.shape[0])
    b = back_substitution(L.T, forward_substitution(L, eye))
    return 0.5 * (b + b.T)


def logdet_spd(a):
    L = cholesky(a)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


# ---------------------------------------------------------------------------
# Eigenvalues
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenSummary:
    values: np.ndarray  # complex, length p
    all_real: bool
    all_positive_real: bool
    min_real_symmetric: float | None = None
    max_real_symmetric: float | None = None

    def to_dict(self):
        return {
            "values_real": [float(v.real) for v in self.values],
            "values_imag": [float(v.imag) for v in self.values],
            "all_real": self.all_real,
            "all_positive_real": self.all_positive_real,
            "min_real_symmetric": self.min_real_symmetric,
            "max_real_symmetric": self.max_real_symmetric,
        }


def _tridiagonalize(a):
    """Householder reduction of a symmetric matrix; returns (diagonal, subdiagonal)."""
    A = a.copy()
    n = A.shape[0]
    for k in range(n - 2):
        x = A[k + 1:, k]
        tail = np.linalg.norm(x[1:])
        if tail == 0.0:
            continue
        alpha = -math.copysign(math.hypot(x[0], tail), x[0])
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        sub = A[k + 1:, k + 1:]
        w = sub @ v
        q = w - (v @ w) * v
        sub -= 2.0 * (np.outer(v, q) + np.outer(q, v))
        A[k + 1, k] = A[k, k + 1] = alpha
        A[k + 2:, k] = 0.0
        A[k, k + 2:] = 0.0
    return np.diag(A).copy(), np.append(np.diag(A, -1), 0.0)


def _tql(d, e, max_steps):
    """Implicit QL on a symmetric tridiagonal matrix (eigenvalues only)."""
    n = len(d)
    steps = 0
    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= EPS * dd:
                    break
                m += 1
            if m == l:
                break
            steps += 1
            if steps > max_steps:
                raise NoConvergence(
                    f"tridiagonal QL did not converge within {max_steps} steps",
                    iterations=steps,
                )
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d


def eig_symmetric(a):
    """Real spectrum of a symmetric matrix, ascending."""
    a = as_square(a)
    check_symmetric(a)
    n = a.shape[0]
    d, e = _tridiagonalize(0.5 * (a + a.T))
    vals = np.sort(_tql(d, e, QR_STEPS_PER_DIM * n))
    return EigenSummary(
        values=vals.astype(complex),
        all_real=True,
        all_positive_real=bool(vals[0] > 0.0),
        min_real_symmetric=float(vals[0]),
        max_real_symmetric=float(vals[-1]),
    )


def _hessenberg(a):
    H = a.copy()
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1:, k]
        tail = np.linalg.norm(x[1:])
        if tail == 0.0:
            continue
        alpha = -math.copysign(math.hypot(x[0], tail), x[0])
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        H[k + 1:, :] -= 2.0 * np.outer(v, v @ H[k + 1:, :])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v)
        H[k + 2:, k] = 0.0
    return H


def _house(x):
    v = np.array(x, dtype=float)
    alpha = np.linalg.norm(v)
    if alpha == 0.0:
        return v, 0.0
    v[0] += math.copysign(alpha, v[0])
    return v, 2.0 / (v @ v)


def _eig2(a, b, c, d):
    half_tr = 0.5 * (a + d)
    half_diff = 0.5 * (a - d)
    disc = half_diff * half_diff + b * c
    if disc >= 0.0:
        root = math.sqrt(disc)
        big = half_tr + math.copysign(root, half_tr) if half_tr != 0.0 else root
        det = a * d - b * c
        small = det / big if big != 0.0 else half_tr - root
        return complex(big), complex(small)
    root = math.sqrt(-disc)
    return complex(half_tr, root), complex(half_tr, -root)


def _francis_step(W, exceptional):
    m = W.shape[0]
    if exceptional:
        s0 = abs(W[m - 1, m - 2]) + abs(W[m - 2, m - 3])
        s, t = 1.5 * s0, s0 * s0
    else:
        s = W[m - 2, m - 2] + W[m - 1, m - 1]
        t = W[m - 2, m - 2] * W[m - 1, m - 1] - W[m - 2, m - 1] * W[m - 1, m - 2]
    x = W[0, 0] * W[0, 0] + W[0, 1] * W[1, 0] - s * W[0, 0] + t
    y = W[1, 0] * (W[0, 0] + W[1, 1] - s)
    z = W[1, 0] * W[2, 1]
    for k in range(m - 2):
        v, beta = _house((x, y, z))
        if beta:
            r = max(0, k - 1)
            blk = W[k:k + 3, r:]
            blk -= beta * np.outer(v, v @ blk)
            rr = min(k + 4, m)
            blk = W[:rr, k:k + 3]
            blk -= beta * np.outer(blk @ v, v)
        x = W[k + 1, k]
        y = W[k + 2, k]
        if k < m - 3:
            z = W[k + 3, k]
    v, beta = _house((x, y))
    if beta:
        blk = W[m - 2:, m - 3:]
        blk -= beta * np.outer(v, v @ blk)
        blk = W[:, m - 2:]
        blk -= beta * np.outer(blk @ v, v)


def _hqr(H, max_steps):
    n = H.shape[0]
    vals = np.zeros(n, dtype=complex)
    anorm = np.max(np.abs(H)) or 1.0
    hi = n - 1
    steps = 0
    its = 0
    while hi >= 0:
        l = hi
        while l > 0:
            s = abs(H[l - 1, l - 1]) + abs(H[l, l])
            if s == 0.0:
                s = anorm
            if abs(H[l, l - 1]) <= EPS * s:
                H[l, l - 1] = 0.0
                break
            l -= 1
        if l == hi:
            vals[hi] = H[hi, hi]
            hi -= 1
            its = 0
            continue
        if l == hi - 1:
            vals[hi - 1], vals[hi] = _eig2(H[l, l], H[l, hi], H[hi, l], H[hi, hi])
            hi -= 2
            its = 0
            continue
        steps += 1
        its += 1
        if steps > max_steps:
            raise NoConvergence(
                f"Hessenberg QR did not converge within {max_steps} steps",
                iterations=steps,
            )
        _francis_step(H[l:hi + 1, l:hi + 1], exceptional=its in (10, 20))
    return vals


def eig_general(a):
    """Complex spectrum of an arbitrary real square matrix.

    Eigenvalues count as real when their imaginary part is at most
    ``1e-8 * (1 + max|a|)``.
    """
    a = as_square(a)
    n = a.shape[0]
    vals = _hqr(_hessenberg(a), QR_STEPS_PER_DIM * n)
    order = np.lexsort((vals.imag, vals.real))
    vals = vals[order]
    tol = 1e-8 * (1.0 + np.max(np.abs(a)))
    all_real = bool(np.all(np.abs(vals.imag) <= tol))
    lo = hi = None
    if all_real:
        lo, hi = float(vals.real.min()), float(vals.real.max())
    return EigenSummary(
        values=vals,
        all_real=all_real,
        all_positive_real=bool(all_real and np.all(vals.real > 0.0)),
        min_real_symmetric=lo,
        max_real_symmetric=hi,
    )


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

def sup_norm(a):
    return float(np.max(np.abs(a)))


def op_inf_norm(a):
    return float(np.max(np.sum(np.abs(a), axis=1)))


def op_2_norm_symmetric(a):
    ev = eig_symmetric(a)
    return max(abs(ev.min_real_symmetric), abs(ev.max_real_symmetric))


def condition_number(a):
    """lambda_max / lambda_min of a symmetric positive definite matrix."""
    cholesky(a)
    ev = eig_symmetric(a)
    if ev.min_real_symmetric <= 0.0:
        raise NotPositiveDefinite("smallest eigenvalue is not positive")
    return ev.max_real_symmetric / ev.min_real_symmetric


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def write_csv(path, a):
    """One row per line, comma separated, 17 significant digits, no header."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    np.savetxt(path, a, delimiter=",", fmt="%.17g")


def read_csv(path):
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float, ndmin=2))
