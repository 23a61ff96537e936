import itertools
import warnings

import numpy as np
import pytest

from glassosym.diagnose import edge_sets
from glassosym.errors import CliqueTimeout, CliqueTooLarge, NotPositiveDefinite
from glassosym.glasso import GlassoFit, glasso
from glassosym.linalg import invert_spd, is_symmetric
from glassosym.models import ar1_model, example1_model, sample, sample_covariance, two_by_two_fixture
from glassosym.repair import (
    Graph,
    IllConditioned,
    enumerate_maximal_cliques,
    fit_known_structure,
    graph_from_upper,
    ipf,
    repair_inversion,
    repair_ipf,
    repair_modified_output,
)


def fake_fit(omega, sigma=None, lam=0.1):
    omega = np.asarray(omega, dtype=float)
    sigma = np.eye(omega.shape[0]) if sigma is None else sigma
    return GlassoFit(sigma, omega, lam, 1, True)


def random_graph(p, density, seed):
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(p) for j in range(i + 1, p) if rng.random() < density]
    return Graph.from_edges(p, pairs)


def brute_cliques(g):
    adj = g.adjacency()
    cliques = []
    for mask in range(1, 1 << g.p):
        nodes = [i for i in range(g.p) if mask >> i & 1]
        if all(b in adj[a] for a, b in itertools.combinations(nodes, 2)):
            cliques.append(frozenset(nodes))
    maximal = [c for c in cliques if not any(c < d for d in cliques)]
    return sorted(sorted(c) for c in maximal)


def test_graph_canonical():
    g = Graph.from_edges(4, [(2, 1), (1, 2), (0, 3)])
    assert g.edges == {(1, 2), (0, 3)}
    with pytest.raises(ValueError):
        Graph.from_edges(3, [(1, 1)])
    with pytest.raises(ValueError):
        Graph.from_edges(3, [(0, 3)])


def test_modified_output_trivial():
    est = repair_modified_output(fake_fit([[1, 2], [5, 3]]))
    assert np.array_equal(est.omega, [[1, 2], [2, 3]])
    sym = np.array([[2.0, -1.0], [-1.0, 4.0]])
    assert np.array_equal(repair_modified_output(fake_fit(sym)).omega, sym)


def test_modified_output_edges_equal_upper_triangle():
    S = sample_covariance(sample(example1_model(), 500, 1))
    f = glasso(S, 0.0033)
    est = repair_modified_output(f)
    assert is_symmetric(est.omega)
    assert edge_sets(est.omega).e1 == edge_sets(f.omega_raw).e1
    assert edge_sets(est.omega).e2 == edge_sets(f.omega_raw).e1


def test_inversion_two_by_two():
    fx = two_by_two_fixture()
    est = repair_inversion(glasso(fx.S, fx.lam))
    assert np.allclose(est.omega, fx.omega_hat, rtol=1e-9, atol=0)
    assert all(est.properties.values())


def test_inversion_threshold_zero_is_exact_inverse():
    S = sample_covariance(sample(example1_model(), 200, 0))
    f = glasso(S, 0.05)
    est = repair_inversion(f, threshold=0.0)
    assert np.allclose(est.omega @ f.sigma_hat, np.eye(5), atol=1e-8)


def test_inversion_zero_pattern_vs_raw_upper():
    S = sample_covariance(sample(example1_model(), 500, 1))
    f = glasso(S, 0.0033)
    est = repair_inversion(f)
    inv = invert_spd(f.sigma_hat)
    iu = np.triu_indices(5, 1)
    disagree = (est.omega[iu] == 0) != (f.omega_raw[iu] == 0)
    # any disagreement must be a sub-threshold entry
    assert np.all(np.abs(inv[iu][disagree]) < est.threshold + 1e-9)


def test_inversion_failures():
    bad = fake_fit(np.eye(2), sigma=np.diag([1.0, 0.0]))
    with pytest.raises(NotPositiveDefinite) as info:
        repair_inversion(bad)
    assert info.value.stage == "before_threshold"
    # a threshold above every entry of the inverse leaves the zero matrix
    sigma = np.array([[1.0, -0.999], [-0.999, 1.0]])
    with pytest.raises(NotPositiveDefinite) as info:
        repair_inversion(fake_fit(np.eye(2), sigma=sigma), threshold=600.0)
    assert info.value.stage == "after_threshold"


def test_ill_conditioned_warning():
    f = fake_fit(np.eye(2), sigma=np.diag([1.0, 1e-13]), lam=1e-13)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        est = repair_inversion(f)
    assert any(issubclass(w.category, IllConditioned) for w in caught)
    assert est.warnings


def test_cliques_small():
    tri = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    assert enumerate_maximal_cliques(tri) == [[0, 1, 2]]
    assert enumerate_maximal_cliques(Graph.path(3)) == [[0, 1], [1, 2]]
    assert enumerate_maximal_cliques(Graph.empty(2)) == [[0], [1]]


@pytest.mark.parametrize("seed", range(5))
def test_cliques_vs_exhaustive(seed):
    g = random_graph(12, 0.45, seed)
    got = enumerate_maximal_cliques(g)
    assert got == brute_cliques(g)
    covered = {e for c in got for e in itertools.combinations(c, 2)}
    assert g.edges <= covered


def test_clique_timeout_and_cap():
    with pytest.raises(CliqueTimeout) as info:
        enumerate_maximal_cliques(random_graph(12, 0.5, 0), timeout=-1.0)
    assert info.value.valid is False
    with pytest.raises(ValueError):
        enumerate_maximal_cliques(Graph.empty(5), max_nodes=4)
    S = np.eye(6) + 0.1
    with pytest.raises(CliqueTooLarge):
        ipf(S, Graph.complete(6), max_clique=4)


def spd_cov(p, seed):
    return sample_covariance(sample(ar1_model(p, 0.6), 4 * p, seed))


@pytest.mark.parametrize("solver", ["ipf", "known"])
def test_trivial_graphs(solver):
    S = spd_cov(5, 0)
    run = (lambda g: ipf(S, g)[:2]) if solver == "ipf" else (lambda g: fit_known_structure(S, g))
    sig, om = run(Graph.complete(5))
    assert np.allclose(sig, S, atol=1e-8) and np.allclose(om, invert_spd(S), atol=1e-8)
    sig, om = run(Graph.empty(5))
    assert np.allclose(sig, np.diag(np.diag(S)), atol=1e-12)
    assert np.allclose(om, np.diag(1 / np.diag(S)), atol=1e-12)


def test_path_graph_closed_form():
    S = spd_cov(3, 1)
    sig, om, _ = ipf(S, Graph.path(3))
    assert sig[0, 2] == pytest.approx(S[0, 1] * S[1, 2] / S[1, 1], abs=1e-8)
    assert om[0, 2] == 0.0 and om[2, 0] == 0.0
    sig2, om2 = fit_known_structure(S, Graph.path(3))
    assert np.allclose(sig, sig2, atol=1e-7) and np.allclose(om, om2, atol=1e-7)


@pytest.mark.parametrize("seed", range(6))
def test_ipf_vs_known_structure(seed):
    p = 6 + seed
    S = spd_cov(p, seed)
    g = random_graph(p, 0.35, seed)
    tol = 1e-10
    sig, om, _ = ipf(S, g, tol=tol)
    sig2, om2 = fit_known_structure(S, g, tol=tol)
    mask = g.mask()
    assert np.abs(sig - S)[mask].max() <= 1e-7
    assert np.all(om[~mask] == 0) and np.all(om2[~mask] == 0)
    assert np.allclose(om @ sig, np.eye(p), atol=1e-8)
    assert np.abs(sig - sig2).max() <= 1e-6 and np.abs(om - om2).max() <= 1e-6


def test_repair_ipf_engines_agree():
    S = sample_covariance(sample(ar1_model(10, 0.75), 40, 2))
    f = glasso(S, 0.05)
    a = repair_ipf(f, S)
    b = repair_ipf(f, S, engine="regression")
    assert a.details["moment_sigma_gap"] <= 1e-7 and a.details["moment_omega_offgraph"] == 0
    assert np.abs(a.omega - b.omega).max() <= 1e-6
    assert graph_from_upper(a.omega).edges <= graph_from_upper(f.omega_raw).edges
    with pytest.raises(ValueError):
        repair_ipf(f, S, engine="nope")
