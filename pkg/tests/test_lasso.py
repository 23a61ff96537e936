import itertools

import numpy as np
import pytest

from glassosym.lasso import lasso_kkt_residual, lasso_objective, soft_threshold, solve_lasso


def support_oracle(Q, b, lam):
    """Exhaustive search over sign patterns; returns the KKT-valid minimizer."""
    d = len(b)
    best, best_val = np.zeros(d), lasso_objective(Q, b, lam, np.zeros(d))
    for signs in itertools.product((-1, 0, 1), repeat=d):
        s = np.array(signs, dtype=float)
        act = np.flatnonzero(s)
        if not act.size:
            continue
        x = np.zeros(d)
        x[act] = np.linalg.solve(Q[np.ix_(act, act)], b[act] - lam * s[act])
        if np.any(np.sign(x[act]) != s[act]):
            continue
        val = lasso_objective(Q, b, lam, x)
        if val < best_val:
            best, best_val = x, val
    return best


def test_soft_threshold():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    assert soft_threshold(0.5, 1.0) == 0.0
    with pytest.raises(ValueError):
        soft_threshold(1.0, -1.0)


def test_matches_exhaustive_oracle():
    rng = np.random.default_rng(20)
    for _ in range(20):
        a = rng.standard_normal((8, 5))
        Q = a.T @ a / 8 + 0.05 * np.eye(5)
        b = rng.standard_normal(5)
        lam = rng.uniform(0.05, 0.8)
        got = solve_lasso(Q, b, lam, tol=1e-10).beta
        assert np.allclose(got, support_oracle(Q, b, lam), atol=1e-7)


def test_objective_history_nonincreasing():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((30, 12))
    Q, b = a.T @ a / 30, rng.standard_normal(12)
    sol = solve_lasso(Q, b, 0.1, record=True)
    h = np.array(sol.objective_history)
    assert len(h) >= 2
    assert np.all(np.diff(h) <= 1e-12 * (1 + np.abs(h).max()))
    assert lasso_kkt_residual(Q, b, 0.1, sol.beta) <= 1e-10


def test_large_lambda_gives_zero_and_zero_lambda_solves():
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    b = np.array([1.0, -1.0])
    assert np.all(solve_lasso(Q, b, 10.0).beta == 0.0)
    assert np.allclose(solve_lasso(Q, b, 0.0, tol=1e-12).beta, np.linalg.solve(Q, b), atol=1e-10)


def test_warm_start_reaches_same_point():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((10, 6))
    Q, b = a.T @ a / 10 + 0.1 * np.eye(6), rng.standard_normal(6)
    cold = solve_lasso(Q, b, 0.2).beta
    warm = solve_lasso(Q, b, 0.2, warm_start=rng.standard_normal(6)).beta
    assert np.allclose(cold, warm, atol=1e-9)


def test_input_validation():
    Q = np.eye(2)
    with pytest.raises(ValueError):
        solve_lasso(Q, np.ones(3), 0.1)
    with pytest.raises(ValueError):
        solve_lasso(np.zeros((2, 2)), np.ones(2), 0.1)
    with pytest.raises(ValueError):
        solve_lasso(Q, np.ones(2), -1.0)
    with pytest.raises(ValueError):
        solve_lasso(Q, np.ones(2), 0.1, tol=0.0)
