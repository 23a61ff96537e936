"""Ground-truth Gaussian models, seeded sampling and sample covariances.

Normal variates come from a fixed recipe so datasets can be regenerated from
``(model, n, seed)`` alone:

1. uniforms ``u`` are drawn with ``numpy.random.Generator(PCG64(seed)).random``;
2. consecutive pairs ``(u1, u2)`` go through Box-Muller,
   ``r = sqrt(-2 log(1 - u1))``, giving ``r cos(2 pi u2)`` then ``r sin(2 pi u2)``;
3. the stream fills an ``n x p`` matrix ``Z`` in row-major order and the rows
   are mapped to ``x = L z`` where ``L`` is the Cholesky factor of the model
   covariance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidPhi, TooFewSamples
from .linalg import cholesky, invert_spd

# upper triangle of the 5x5 concentration matrix used in the low-dimensional example
_EXAMPLE1_UPPER = [
    [2.425, 0.069, -0.885, 0.0, 0.0],
    [0.0, 2.944, -0.129, 0.988, 0.0],
    [0.0, 0.0, 2.696, 0.035, -0.974],
    [0.0, 0.0, 0.0, 1.724, 0.851],
    [0.0, 0.0, 0.0, 0.0, 1.000],
]


@dataclass(frozen=True)
class GaussianModel:
    omega: np.ndarray
    sigma: np.ndarray

    @property
    def p(self):
        return self.omega.shape[0]

    @classmethod
    def from_precision(cls, omega):
        omega = np.array(omega, dtype=float)
        cholesky(omega)
        return cls(omega=omega, sigma=invert_spd(omega))


@dataclass(frozen=True)
class Dataset:
    rows: np.ndarray
    seed: int

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def p(self):
        return self.rows.shape[1]


def example1_model():
    upper = np.array(_EXAMPLE1_UPPER)
    omega = upper + np.triu(upper, 1).T
    return GaussianModel.from_precision(omega)


def ar1_model(p, phi):
    """Exact precision of X1 = e1, X(t+1) = phi X(t) + e(t+1), unit innovations."""
    if p < 2:
        raise ValueError("AR(1) model needs p >= 2")
    if not abs(phi) < 1.0:
        raise InvalidPhi(f"phi must satisfy |phi| < 1, got {phi}")
    omega = np.zeros((p, p))
    idx = np.arange(p)
    omega[idx, idx] = 1.0 + phi * phi
    omega[p - 1, p - 1] = 1.0
    omega[idx[:-1], idx[1:]] = -phi
    omega[idx[1:], idx[:-1]] = -phi
    return GaussianModel.from_precision(omega)


def standard_normals(count, seed):
    """``count`` standard normal draws from the documented Box-Muller recipe."""
    pairs = (count + 1) // 2
    u = np.random.Generator(np.random.PCG64(seed)).random(2 * pairs)
    r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
    angle = 2.0 * math.pi * u[1::2]
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(angle)
    z[1::2] = r * np.sin(angle)
    return z[:count]


def sample(model, n, seed):
    if n < 1:
        raise ValueError("n must be at least 1")
    p = model.p
    z = standard_normals(n * p, seed).reshape(n, p)
    L = cholesky(model.sigma)
    return Dataset(rows=z @ L.T, seed=seed)


def sample_covariance(data, divisor="n"):
    """Centered second-moment matrix, exactly symmetric.

    ``divisor`` is ``"n"`` (maximum likelihood) or ``"n_minus_1"``.
    """
    x = data.rows if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data, dtype=float))
    n, p = x.shape
    if divisor == "n":
        if n < 1:
            raise TooFewSamples("need at least one sample")
        denom = n
    elif divisor == "n_minus_1":
        if n < 2:
            raise TooFewSamples("divisor n-1 needs at least two samples")
        denom = n - 1
    else:
        raise ValueError(f"unknown divisor {divisor!r}")
    xc = x - x.mean(axis=0)
    s = (xc.T @ xc) / denom
    upper = np.triu(s)
    return upper + np.triu(upper, 1).T


@dataclass(frozen=True)
class TwoByTwoFixture:
    """S = diag(1, 0) at lam = 1e-6 and its closed-form glasso optimum."""

    S: np.ndarray
    lam: float
    sigma_hat: np.ndarray
    omega_hat: np.ndarray


def two_by_two_fixture(lam=1e-6):
    S = np.array([[1.0, 0.0], [0.0, 0.0]])
    sigma = np.diag([1.0 + lam, lam])
    omega = np.diag([1.0 / (1.0 + lam), 1.0 / lam])
    return TwoByTwoFixture(S, lam, sigma, omega)
