"""Exact Euclidean neighbour queries in O(n^2) time and O(n * block) memory.

Candidate neighbours are found with the fast ``|a|^2 + |b|^2 - 2ab`` expansion,
then every reported distance is recomputed from coordinate differences so the
values match a brute-force distance table bit for bit.
"""
from __future__ import annotations

import numpy as np

# max entries in one block of the distance table
BLOCK_ENTRIES = 4_000_000
# extra approximate candidates kept per row before exact re-ranking
CANDIDATE_SLACK = 8


def exact_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Dense |A| x |B| distance table computed from coordinate differences."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    return np.sqrt(((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1))


def row_distances(X: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Distances from one point ``x`` to every row of ``X``."""
    return np.sqrt(((X - x) ** 2).sum(axis=-1))


def _blocks(n: int, width: int):
    step = max(1, BLOCK_ENTRIES // max(width, 1))
    for start in range(0, n, step):
        yield start, min(n, start + step)


def knn_distances(X: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Sorted distances and indices of the ``k`` nearest *other* rows of every row.

    Ties are ordered by lower row index.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must lie in [1, n-1] = [1, {n - 1}], got {k}")
    sqn = np.einsum("ij,ij->i", X, X)
    n_cand = min(n - 1, k + CANDIDATE_SLACK)
    out_d = np.empty((n, k))
    out_i = np.empty((n, k), dtype=np.intp)
    for lo, hi in _blocks(n, n):
        rows = np.arange(lo, hi)
        d2 = sqn[lo:hi, None] + sqn[None, :] - 2.0 * (X[lo:hi] @ X.T)
        d2[np.arange(hi - lo), rows] = np.inf
        if n_cand < n - 1:
            cand = np.argpartition(d2, n_cand - 1, axis=1)[:, :n_cand]
        else:
            cand = np.argsort(d2, axis=1)[:, :n_cand]
        diff = X[lo:hi, None, :] - X[cand]
        dist = np.sqrt((diff * diff).sum(axis=-1))
        # lexsort: primary key distance, secondary key index
        order = np.lexsort((cand, dist), axis=1)[:, :k]
        out_d[lo:hi] = np.take_along_axis(dist, order, axis=1)
        out_i[lo:hi] = np.take_along_axis(cand, order, axis=1)
    return out_d, out_i


def radius_neighbors(X: np.ndarray, sqn: np.ndarray, rows: np.ndarray, eps: float) -> list[np.ndarray]:
    """Indices ``j`` (self included) with ``dist(i, j) <= eps`` for each ``i`` in ``rows``."""
    rows = np.atleast_1d(rows)
    d2 = sqn[rows, None] + sqn[None, :] - 2.0 * (X[rows] @ X.T)
    # generous slack on the approximate table, exact test afterwards
    slack = 1e-9 * (sqn[rows, None] + sqn[None, :]) + 1e-12
    e2 = eps * eps
    out = []
    for r, i in enumerate(rows):
        # rows clearly inside are accepted; only the band around eps is re-checked exactly
        sure = d2[r] < e2 - slack[r]
        band = np.flatnonzero(~sure & (d2[r] <= e2 + slack[r]))
        keep = band[row_distances(X[band], X[i]) <= eps]
        out.append(np.union1d(np.flatnonzero(sure), keep))
    return out


def radius_counts(X: np.ndarray, eps: float) -> np.ndarray:
    """Number of rows (self included) within ``eps`` of every row."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    sqn = np.einsum("ij,ij->i", X, X)
    counts = np.empty(n, dtype=np.intp)
    for lo, hi in _blocks(n, n):
        nb = radius_neighbors(X, sqn, np.arange(lo, hi), eps)
        counts[lo:hi] = [len(a) for a in nb]
    return counts
