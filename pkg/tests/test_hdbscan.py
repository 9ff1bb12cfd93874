import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from anomkit.errors import KTooLarge
from anomkit.hdbscan import (
    HdbscanConfig,
    _single_linkage,
    build_mst,
    condense_tree,
    core_distances,
    hdbscan_detect,
    hdbscan_labels,
    mutual_reachability,
    select_clusters,
)

seeds = st.integers(0, 2**32 - 1)


def random_data(seed, n_lo=5, n_hi=60, d_hi=3, grid=None):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_lo, n_hi + 1))
    d = int(rng.integers(1, d_hi + 1))
    if grid if grid is not None else rng.random() < 0.4:
        return rng.integers(0, 5, size=(n, d)).astype(float)
    centers = rng.normal(0, 4, size=(3, d))
    return centers[rng.integers(0, 3, n)] + rng.normal(size=(n, d))


def two_blobs_with_noise(seed=0, far=True):
    """Blobs of 30 at (+-5, 0) with sd 0.1 plus 4 uniform noise points.

    Noise that links to a blob before the blobs split away from each other is
    absorbed by that blob's cluster (it departs from it later).  With ``far``
    the noise lies 20-30 from the origin so it leaves the root first.
    """
    rng = np.random.default_rng(seed)
    blobs = np.vstack([rng.normal((-5, 0), 0.1, (30, 2)), rng.normal((5, 0), 0.1, (30, 2))])
    noise = []
    while len(noise) < 4:
        if far:
            r, phi = rng.uniform(20, 30), rng.uniform(0, 2 * np.pi)
            p, gap = np.array([r * np.cos(phi), r * np.sin(phi)]), 12.0
        else:
            p, gap = rng.uniform(-10, 10, 2), 3.0
        if min(np.hypot(*(p - (-5, 0))), np.hypot(*(p - (5, 0)))) > gap and all(np.hypot(*(p - q)) > gap for q in noise):
            noise.append(p)
    return np.vstack([blobs, noise])


# -- core and mutual reachability distances --------------------------------------


def test_core_distance_examples():
    assert core_distances([0.0, 1.0, 3.0], 1).tolist() == [1.0, 1.0, 2.0]
    X = np.array([[1.0, 2.0], [1.0, 2.0], [5.0, 5.0], [5.0, 5.0], [9.0, 0.0]])
    assert core_distances(X, 1)[:4].tolist() == [0.0] * 4
    with pytest.raises(KTooLarge):
        core_distances(X, 5)


def test_core_distance_oracle_100x4():
    X = np.random.default_rng(3).normal(size=(100, 4))
    assert np.allclose(core_distances(X, 5), oracles.kth_other(X, 5), rtol=0, atol=1e-12)


def test_mutual_reachability_examples():
    X = np.array([[0.0], [1.0]])
    assert mutual_reachability(X, np.zeros(2), 0, 1) == 1.0
    assert mutual_reachability(X, np.array([5.0, 2.0]), 0, 1) == 5.0


@given(seeds)
def test_mutual_reachability_symmetric(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(8, 3))
    core = rng.uniform(0, 2, 8)
    i, j = rng.choice(8, 2, replace=False)
    assert mutual_reachability(X, core, i, j) == mutual_reachability(X, core, j, i)


# -- minimum spanning tree ------------------------------------------------------


def test_mst_examples():
    X = [0.0, 1.0, 10.0]
    mst = build_mst(X, core_distances(X, 1))
    assert mst[:, 2].sum() == 10.0
    mst = build_mst([[0.0, 0.0], [3.0, 4.0]], np.zeros(2))
    assert mst.tolist() == [[0.0, 1.0, 5.0]]


def mst_edge_set(edges):
    return sorted((min(int(i), int(j)), max(int(i), int(j)), float(w)) for i, j, w in edges)


@given(seeds, st.integers(1, 6))
def test_mst_equals_dense_reference(seed, kappa):
    X = random_data(seed)
    kappa = min(kappa, len(X) - 1)
    core = core_distances(X, kappa)
    ours = build_mst(X, core)
    W = oracles.mutual_reachability_matrix(X, kappa)
    ref = oracles.kruskal_mst(W)
    assert math.fsum(ours[:, 2]) == math.fsum(w for _, _, w in ref)
    # the (weight, min id, max id) order is total, so the tree is unique
    assert mst_edge_set(ours) == mst_edge_set(ref)
    # every edge weighs at least both endpoint core distances
    i, j = ours[:, 0].astype(int), ours[:, 1].astype(int)
    assert np.all(ours[:, 2] >= np.maximum(core[i], core[j]))


def test_mst_weights_match_sklearn():
    from sklearn.cluster._hdbscan.hdbscan import _hdbscan_brute

    X = np.random.default_rng(5).normal(size=(80, 3))
    for kappa in (1, 4, 9):
        ours = np.sort(build_mst(X, core_distances(X, kappa))[:, 2])
        slt = _hdbscan_brute(X, min_samples=kappa + 1, alpha=1.0, metric="euclidean")
        assert np.allclose(ours, np.sort(slt["value"]), rtol=1e-12, atol=1e-12)


@given(seeds)
def test_kappa_one_heights_match_single_linkage(seed):
    from scipy.cluster.hierarchy import linkage

    X = random_data(seed, grid=False)
    # at kappa = 1 every pairwise distance already exceeds both core distances
    ours = np.sort(build_mst(X, core_distances(X, 1))[:, 2])
    ref = np.sort(linkage(X, method="single")[:, 2])
    assert np.allclose(ours, ref, rtol=1e-12, atol=1e-12)


# -- condensed tree ---------------------------------------------------------------


def tree_of(X, kappa, mcs):
    return condense_tree(build_mst(X, core_distances(X, kappa)), mcs)


def test_condense_two_blobs():
    X = np.array([0, 0.1, 0.2, 0.3, 0.4, 10, 10.1, 10.2, 10.3, 10.4])
    tree = tree_of(X, 1, 3)
    clusters = tree.child[tree.child >= tree.n_points]
    assert len(clusters) == 2
    assert set(tree.parent[np.isin(tree.child, clusters)]) == {tree.root}


def test_condense_min_size_above_n():
    X = np.random.default_rng(0).normal(size=(12, 2))
    tree = tree_of(X, 2, 50)
    assert np.all(tree.parent == tree.root) and np.all(tree.child < 12)
    labels, _ = select_clusters(tree)
    assert np.all(labels == -1)


@given(seeds, st.integers(1, 5), st.integers(2, 8))
def test_condensed_tree_invariants(seed, kappa, mcs):
    X = random_data(seed)
    kappa = min(kappa, len(X) - 1)
    tree = tree_of(X, kappa, mcs)
    n = len(X)
    points = tree.child[tree.child < n]
    assert sorted(points.tolist()) == list(range(n))
    assert np.all(tree.lam >= 0)
    birth = tree.birth_lambda()
    for p, lam in zip(tree.parent, tree.lam):
        assert lam >= birth[int(p)]


# -- cluster selection -------------------------------------------------------------


def test_select_blobs_and_noise():
    X = two_blobs_with_noise()
    labels, tree = hdbscan_labels(X, HdbscanConfig(kappa=5, min_cluster_size=5))
    assert len(set(labels[labels >= 0])) == 2
    assert np.flatnonzero(labels == -1).tolist() == [60, 61, 62, 63]
    assert len(set(labels[:30])) == 1 and len(set(labels[30:60])) == 1


def test_near_noise_is_absorbed_like_the_reference():
    from sklearn.cluster import HDBSCAN

    X = two_blobs_with_noise(far=False)
    labels, _ = hdbscan_labels(X, HdbscanConfig(kappa=5, min_cluster_size=5))
    ref = HDBSCAN(min_cluster_size=5, min_samples=6).fit(X).labels_
    assert len(set(labels[labels >= 0])) == 2
    assert np.array_equal(labels == -1, ref == -1)


def test_select_single_blob():
    X = np.random.default_rng(1).normal(0, 0.1, size=(40, 2))
    labels, _ = hdbscan_labels(X, HdbscanConfig(kappa=5, min_cluster_size=5))
    assert np.all(labels == 0)


def test_select_deterministic():
    tree = tree_of(two_blobs_with_noise(2), 5, 5)
    a, sa = select_clusters(tree)
    b, sb = select_clusters(tree)
    assert np.array_equal(a, b) and sa == sb


@given(seeds, st.integers(1, 5), st.integers(2, 8))
def test_selected_clusters_form_antichain(seed, kappa, mcs):
    X = random_data(seed)
    kappa = min(kappa, len(X) - 1)
    tree = tree_of(X, kappa, mcs)
    _, stab = select_clusters(tree)
    parent = {int(c): int(p) for p, c in zip(tree.parent, tree.child) if c >= tree.n_points}
    chosen = set(stab)
    for c in chosen:
        a = parent.get(c)
        while a is not None:
            assert a not in chosen
            a = parent.get(a)


@given(seeds, st.integers(1, 6), st.integers(2, 8))
def test_labels_match_sklearn_on_same_hierarchy(seed, kappa, mcs):
    from sklearn.cluster._hdbscan._tree import HIERARCHY_dtype, tree_to_labels

    X = random_data(seed, n_lo=20, n_hi=80, grid=False)
    kappa = min(kappa, len(X) - 1)
    mst = build_mst(X, core_distances(X, kappa))
    tree = condense_tree(mst, mcs)
    if not np.any(tree.child >= tree.n_points):
        # no split: we keep one cluster, the reference declares all noise
        return
    link = _single_linkage(mst, len(X))
    slt = np.array([tuple(r) for r in link], dtype=HIERARCHY_dtype)
    ref, _ = tree_to_labels(slt, mcs, "eom", False)
    ours, _ = select_clusters(tree)
    assert np.array_equal(ours == -1, ref == -1)
    # same partition up to renumbering
    pairs = set(zip(ours[ours >= 0].tolist(), ref[ref >= 0].tolist()))
    assert len(pairs) == len({a for a, _ in pairs}) == len({b for _, b in pairs})


def test_detect_flags_noise():
    res = hdbscan_detect(two_blobs_with_noise(), HdbscanConfig(kappa=5, min_cluster_size=5))
    assert res.flagged_ids == ["60", "61", "62", "63"]
    assert res.scores.tolist() == res.flags.astype(float).tolist()
