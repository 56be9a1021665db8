from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcgq.clustering import (
    build_laplacian,
    canonical_labels,
    kmeans,
    smallest_k_eigvecs,
    spectral_cluster,
)
from gcgq.graph import degree_matrix, generate_planted_partition
from gcgq.metrics import ari


def two_cliques(m=10):
    g = generate_planted_partition(2, m, 1.0, 0.0, rng_seed=0)
    return g, g.adjacency.toarray()


def brute_inertia(points, k):
    best = np.inf
    n = len(points)
    for labels in product(range(k), repeat=n):
        labels = np.array(labels)
        if np.unique(labels).size != k:
            continue
        cents = np.array([points[labels == j].mean(axis=0) for j in range(k)])
        best = min(best, float(((points - cents[labels]) ** 2).sum()))
    return best


def test_laplacian_modes():
    a = np.array([[0, 0.5], [0.5, 0.0]])
    np.testing.assert_allclose(build_laplacian([1, 1], a), [[1, -0.5], [-0.5, 1]])
    np.testing.assert_allclose(build_laplacian(None, a, "reconstructed"), [[0.5, -0.5], [-0.5, 0.5]])
    with pytest.raises(ValueError, match="symmetric"):
        build_laplacian([1, 1], np.array([[0, 1.0], [0, 0]]))
    with pytest.raises(ValueError, match="mode"):
        build_laplacian([1, 1], a, "normalized")


def test_two_cliques_null_space():
    g, a = two_cliques()
    emb = smallest_k_eigvecs(build_laplacian(degree_matrix(g), a), 2)
    np.testing.assert_allclose(emb.eigenvalues, 0.0, atol=1e-10)
    ind = np.zeros((20, 2))
    ind[:10, 0] = ind[10:, 1] = 1 / np.sqrt(10)
    proj = emb.matrix @ emb.matrix.T
    np.testing.assert_allclose(proj @ ind, ind, atol=1e-10)


def test_two_cliques_recovered():
    g, a = two_cliques()
    res = spectral_cluster(degree_matrix(g), a, 2, rng_seed=0)
    assert ari(res.assignment, g.labels) == 1.0
    assert res.embedding_ref == "spectral"


def test_planted_partition_recovered():
    g = generate_planted_partition(3, 50, 0.3, 0.01, rng_seed=0)
    res = spectral_cluster(degree_matrix(g), g.adjacency.toarray(), 3, rng_seed=0)
    assert ari(res.assignment, g.labels) >= 0.9
    h = res.embedding.matrix
    np.testing.assert_allclose(h.T @ h, np.eye(3), atol=1e-8)


def test_eigvec_sign_convention():
    rng = np.random.default_rng(0)
    m = rng.normal(size=(6, 6))
    emb = smallest_k_eigvecs(m + m.T, 3)
    for col in emb.matrix.T:
        lead = col[np.abs(col) > 1e-12][0]
        assert lead > 0
    assert np.all(np.diff(emb.eigenvalues) >= 0)


def test_eigvecs_k_bounds():
    with pytest.raises(ValueError):
        smallest_k_eigvecs(np.eye(3), 4)


def test_kmeans_separated_blobs():
    rng = np.random.default_rng(1)
    pts = np.vstack([rng.normal(c, 0.1, (20, 2)) for c in ((0, 0), (5, 5), (0, 5))])
    res = kmeans(pts, 3, rng_seed=3)
    assert ari(res.assignment, np.repeat([0, 1, 2], 20)) == 1.0
    assert res.assignment[0] == 0  # canonical: first node opens cluster 0


def test_kmeans_history_nonincreasing():
    pts = np.random.default_rng(2).normal(size=(60, 3))
    res = kmeans(pts, 4, restarts=1)
    assert np.all(np.diff(res.history) <= 1e-12)
    assert res.inertia == res.history[-1]


def test_kmeans_deterministic():
    pts = np.random.default_rng(3).normal(size=(40, 2))
    a, b = kmeans(pts, 5, rng_seed=9), kmeans(pts, 5, rng_seed=9)
    np.testing.assert_array_equal(a.assignment, b.assignment)
    assert a.inertia == b.inertia


def test_kmeans_duplicate_points_nonempty():
    pts = np.zeros((5, 2))
    pts[4] = 1.0
    res = kmeans(pts, 3, restarts=2)
    assert np.unique(res.assignment).size == 3


def test_kmeans_k_equals_n():
    pts = np.arange(4.0)[:, None]
    res = kmeans(pts, 4)
    np.testing.assert_array_equal(res.assignment, [0, 1, 2, 3])
    assert res.inertia == 0.0


def test_kmeans_arg_checks():
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 1)), 4)
    with pytest.raises(ValueError):
        kmeans(np.zeros(3), 1)
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 1)), 2, restarts=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(4, 8), st.integers(2, 3), st.integers(0, 2**32 - 1))
def test_kmeans_never_beats_brute_force(n, k, seed):
    pts = np.random.default_rng(seed).normal(size=(n, 2))
    res = kmeans(pts, k, restarts=10, rng_seed=seed)
    opt = brute_inertia(pts, k)
    assert res.inertia >= opt - 1e-9
    assert res.inertia <= 1.5 * opt + 1e-9


def test_kmeans_matches_brute_force_on_clusters():
    pts = np.array([[0, 0], [0.2, 0], [3, 3], [3.1, 3.2], [-4, 4], [-4.1, 4], [-3.9, 4.2]])
    assert kmeans(pts, 3).inertia == pytest.approx(brute_inertia(pts, 3))


def test_canonical_labels():
    np.testing.assert_array_equal(canonical_labels(np.array([5, 5, 2, 9, 2])), [0, 0, 1, 2, 1])


@settings(max_examples=10, deadline=None)
@given(st.permutations(list(range(60))))
def test_spectral_permutation_equivariance(perm):
    g = generate_planted_partition(3, 20, 0.5, 0.02, rng_seed=4)
    a = g.adjacency.toarray()
    deg = degree_matrix(g)
    base = spectral_cluster(deg, a, 3).assignment
    perm = np.array(perm)
    moved = spectral_cluster(deg[perm], a[np.ix_(perm, perm)], 3).assignment
    assert ari(moved, base[perm]) == 1.0
