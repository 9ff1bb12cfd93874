"""Distance-based detectors: kNN distance, k-means centroid distance, DBSCAN noise."""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .distance import _blocks, knn_distances, radius_counts, radius_neighbors
from .errors import KTooLarge
from .result import AnomalyResult, as_matrix

NOISE = -1


@dataclass(frozen=True)
class KnnConfig:
    k: int = 3
    m: float = 2.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.m <= 0:
            raise ValueError("m must be > 0")


@dataclass(frozen=True)
class DbscanConfig:
    eps: float
    kappa: int = 5

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be > 0")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")


@dataclass
class KMeansModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    seed: int
    n_iter: int = 0
    inertia_history: list[float] = field(default_factory=list)


def knn_scores(data, k: int) -> np.ndarray:
    """Mean distance from every row to its ``k`` nearest other rows."""
    X, _ = as_matrix(data)
    n = X.shape[0]
    if not 1 <= k <= n - 1:
        raise KTooLarge(f"k={k} needs 1 <= k <= n-1 = {n - 1}")
    dist, _ = knn_distances(X, k)
    return dist.mean(axis=1)


def mean_std_flag(scores, m: float = 2.0) -> tuple[float, np.ndarray]:
    """Flag scores strictly above ``mean + m * population_std``."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("scores must be non-empty")
    if np.ptp(scores) == 0:
        return float(scores[0]), np.zeros(scores.shape, dtype=bool)
    threshold = float(scores.mean() + m * scores.std())
    return threshold, scores > threshold


def knn_detect(data, cfg: KnnConfig = KnnConfig()) -> AnomalyResult:
    X, ids = as_matrix(data)
    t0 = time.perf_counter()
    scores = knn_scores(X, cfg.k)
    threshold, flags = mean_std_flag(scores, cfg.m)
    return AnomalyResult("nn", ids, scores, flags, threshold, time.perf_counter() - t0)


def _assign(X: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = X.shape[0]
    labels = np.empty(n, dtype=np.intp)
    d2 = np.empty(n)
    for lo, hi in _blocks(n, C.shape[0] * max(1, X.shape[1])):
        diff = X[lo:hi, None, :] - C[None, :, :]
        block = (diff * diff).sum(axis=-1)
        lab = block.argmin(axis=1)
        labels[lo:hi] = lab
        d2[lo:hi] = block[np.arange(hi - lo), lab]
    return labels, d2


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    idx = [int(rng.integers(n))]
    d2 = ((X - X[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            # every point coincides with a centre already
            nxt = int(rng.integers(n))
        idx.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[idx].copy()


def kmeans_fit(data, k: int, seed: int = 0, max_iter: int = 300, tol: float = 1e-6) -> KMeansModel:
    """Lloyd iterations from a seeded k-means++ start.

    Empty clusters are re-seeded at the points farthest from their centroid.
    ``inertia_history`` holds the inertia after every assignment step.
    """
    X, _ = as_matrix(data)
    n = X.shape[0]
    if not 2 <= k <= n:
        raise KTooLarge(f"k={k} needs 2 <= k <= n = {n}")
    rng = np.random.default_rng(seed)
    C = _kmeans_pp(X, k, rng)
    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        labels, d2 = _assign(X, C)
        history.append(float(d2.sum()))
        newC = C.copy()
        counts = np.bincount(labels, minlength=k)
        for j in np.flatnonzero(counts):
            newC[j] = X[labels == j].mean(axis=0)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            far = np.argsort(-d2, kind="stable")[: empty.size]
            newC[empty] = X[far]
        shift = float(np.sqrt(((newC - C) ** 2).sum(axis=1)).max())
        C = newC
        if shift < tol:
            break
    labels, d2 = _assign(X, C)
    history.append(float(d2.sum()))
    return KMeansModel(k, C, labels, float(d2.sum()), seed, n_iter, history)


def kmeans_detect(model: KMeansModel, data, m: float = 2.0) -> AnomalyResult:
    X, ids = as_matrix(data)
    t0 = time.perf_counter()
    scores = np.sqrt(((X - model.centroids[model.assignments]) ** 2).sum(axis=1))
    threshold, flags = mean_std_flag(scores, m)
    return AnomalyResult(
        "kmeans", ids, scores, flags, threshold, time.perf_counter() - t0,
        extra={"k": model.k, "labels": model.assignments},
    )


def dbscan(data, cfg: DbscanConfig) -> np.ndarray:
    """Cluster labels (``-1`` = noise) with ``kappa`` counting the point itself.

    Clusters are grown breadth-first in row order; a border point joins the
    first cluster that reaches it.
    """
    X, _ = as_matrix(data)
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    counts = radius_counts(X, cfg.eps)
    core = counts >= cfg.kappa
    sqn = np.einsum("ij,ij->i", X, X)
    labels = np.full(n, NOISE, dtype=np.intp)
    cluster = 0
    for i in range(n):
        if labels[i] != NOISE or not core[i]:
            continue
        labels[i] = cluster
        queue = deque([i])
        while queue:
            p = queue.popleft()
            for q in radius_neighbors(X, sqn, np.array([p]), cfg.eps)[0]:
                if labels[q] == NOISE:
                    labels[q] = cluster
                    if core[q]:
                        queue.append(q)
        cluster += 1
    return labels


def dbscan_detect(data, cfg: DbscanConfig) -> AnomalyResult:
    X, ids = as_matrix(data)
    t0 = time.perf_counter()
    labels = dbscan(X, cfg)
    flags = labels == NOISE
    return AnomalyResult(
        "dbscan", ids, flags.astype(float), flags, 0.5, time.perf_counter() - t0,
        extra={"labels": labels, "eps": cfg.eps, "kappa": cfg.kappa},
    )
