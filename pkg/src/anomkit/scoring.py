"""Clustering quality, knee detection, grid-search tuning and injected-anomaly evaluation."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataio import InjectionRecord
from .distance import _blocks, knn_distances
from .errors import CurveTooShort, NoValidConfig, TooFewClusters, UnknownId
from .proximity import DbscanConfig, KMeansModel, dbscan, kmeans_fit
from .result import AnomalyResult, as_matrix

# above this many evaluated rows silhouette uses the dot-product distance expansion
EXACT_SILHOUETTE_LIMIT = 5000


@dataclass
class EvalMetrics:
    injected_found: int
    total_flagged: int
    flagged_fraction: float
    runtime: float
    quality: float | None = None
    found_ids: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "injected_found": self.injected_found,
            "total_flagged": self.total_flagged,
            "flagged_fraction": self.flagged_fraction,
            "runtime_seconds": self.runtime,
            "quality": self.quality,
            "found_ids": list(self.found_ids),
        }


def _block_distances(A: np.ndarray, B: np.ndarray, exact: bool) -> np.ndarray:
    if exact:
        return np.sqrt(((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1))
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    return np.sqrt(np.maximum(d2, 0.0))


def silhouette_samples(data, labels, exclude_noise: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Per-row silhouette values and the mask of rows they belong to."""
    X, _ = as_matrix(data)
    labels = np.asarray(labels)
    if labels.shape[0] != X.shape[0]:
        raise ValueError("labels and data differ in length")
    mask = labels != -1 if exclude_noise else np.ones(len(labels), dtype=bool)
    Xe, le = X[mask], labels[mask]
    clusters, inv = np.unique(le, return_inverse=True)
    if len(clusters) < 2:
        raise TooFewClusters(f"silhouette needs >= 2 clusters, got {len(clusters)}")
    m, K = len(le), len(clusters)
    onehot = np.zeros((m, K))
    onehot[np.arange(m), inv] = 1.0
    counts = onehot.sum(axis=0)
    exact = m <= EXACT_SILHOUETTE_LIMIT
    s = np.zeros(m)
    for lo, hi in _blocks(m, m * max(1, Xe.shape[1] if exact else 1)):
        D = _block_distances(Xe[lo:hi], Xe, exact)
        sums = D @ onehot
        own = inv[lo:hi]
        rows = np.arange(hi - lo)
        own_n = counts[own]
        with np.errstate(invalid="ignore", divide="ignore"):
            a = sums[rows, own] / (own_n - 1)
            means = sums / counts
        means[rows, own] = np.inf
        b = means.min(axis=1)
        top = np.maximum(a, b)
        with np.errstate(invalid="ignore", divide="ignore"):
            val = np.where(top > 0, (b - a) / top, 0.0)
        val[own_n == 1] = 0.0
        s[lo:hi] = val
    return s, mask


def silhouette(data, labels, exclude_noise: bool = True) -> float:
    """Mean silhouette; singleton clusters contribute 0, noise rows are skipped on request."""
    s, _ = silhouette_samples(data, labels, exclude_noise)
    return float(s.mean())


def knee_point(curve) -> int:
    """Index farthest from the chord joining the first and last points; ties -> smallest index."""
    y = np.asarray(curve, dtype=np.float64)
    if y.size < 3:
        raise CurveTooShort(f"knee detection needs >= 3 points, got {y.size}")
    L = y.size - 1
    i = np.arange(y.size)
    # perpendicular distance up to the (index-independent) chord length
    cross = np.abs(L * (y - y[0]) - i * (y[-1] - y[0]))
    tol = 1e-9 * L * max(np.ptp(y), np.finfo(float).tiny)
    return int(np.flatnonzero(cross >= cross.max() - tol)[0])


def kappa_distance_curve(data, kappa: int) -> np.ndarray:
    """Sorted distances to the (kappa-1)-th nearest other row.

    A row is a DBSCAN core point for ``(eps, kappa)`` exactly when its value is <= eps.
    """
    X, _ = as_matrix(data)
    if kappa <= 1:
        return np.zeros(X.shape[0])
    dist, _ = knn_distances(X, kappa - 1)
    return np.sort(dist[:, -1])


def _derived_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


@dataclass
class KMeansTuning:
    best_k: int
    silhouettes: dict[int, float]
    model: KMeansModel
    trace: list[dict]


def tune_kmeans(data, k_range: Sequence[int], seed: int = 0, m: float = 2.0) -> KMeansTuning:
    """Fit every k and keep the one with the largest full-labelling silhouette (ties -> smallest k).

    ``m`` is carried for the follow-up detection step and does not affect selection.
    """
    X, _ = as_matrix(data)
    k_values = list(k_range)
    if not k_values:
        raise ValueError("k_range must be non-empty")
    sils, models, trace = {}, {}, []
    for idx, k in enumerate(k_values):
        t0 = time.perf_counter()
        model = kmeans_fit(X, k, seed=_derived_seed(seed, idx))
        try:
            q = silhouette(X, model.assignments, exclude_noise=False)
        except TooFewClusters:
            q = -math.inf
        sils[k], models[k] = q, model
        trace.append({"config": {"k": k, "seed": model.seed}, "quality": q, "runtime": time.perf_counter() - t0})
    best = min(k_values, key=lambda k: (-sils[k], k))
    return KMeansTuning(best, sils, models[best], trace)


@dataclass
class DbscanTuning:
    eps: float
    kappa: int
    silhouette: float
    labels: np.ndarray
    trace: list[dict]

    @property
    def config(self) -> DbscanConfig:
        return DbscanConfig(self.eps, self.kappa)


def tune_dbscan(data, kappa_grid: Sequence[int], seed: int = 0) -> DbscanTuning:
    """For each kappa take eps at the knee of the kappa-distance curve and score with
    the noise-excluded silhouette; configs with fewer than two clusters score -inf.

    DBSCAN is deterministic, so ``seed`` only labels the trace.
    """
    X, _ = as_matrix(data)
    grid = list(kappa_grid)
    if not grid:
        raise ValueError("kappa_grid must be non-empty")
    best = None
    trace = []
    for kappa in grid:
        t0 = time.perf_counter()
        curve = kappa_distance_curve(X, kappa)
        eps = float(curve[knee_point(curve)]) if curve.size >= 3 else 0.0
        q, labels = -math.inf, None
        if eps > 0:
            labels = dbscan(X, DbscanConfig(eps, kappa))
            try:
                q = silhouette(X, labels, exclude_noise=True)
            except TooFewClusters:
                q = -math.inf
        trace.append({"config": {"eps": eps, "kappa": kappa, "seed": seed}, "quality": q,
                      "runtime": time.perf_counter() - t0})
        if q > -math.inf and (best is None or q > best.silhouette):
            best = DbscanTuning(eps, kappa, q, labels, trace)
    if best is None:
        raise NoValidConfig("no kappa in the grid produced two or more clusters")
    best.trace = trace
    return best


def default_kappa_grid(n_features: int) -> list[int]:
    """Small grid just above the dimensionality."""
    base = max(2, n_features + 1)
    return sorted({base, base + 2, 2 * n_features})


def evaluate_run(result: AnomalyResult, injected: Sequence[InjectionRecord],
                 quality: float | None = None) -> EvalMetrics:
    flag_of = dict(zip(result.row_ids, (bool(f) for f in result.flags)))
    found = []
    for rec in injected:
        if rec.assigned_id not in flag_of:
            raise UnknownId(f"injected id {rec.assigned_id!r} is not in the scored rows")
        if flag_of[rec.assigned_id]:
            found.append(rec.assigned_id)
    total = result.n_flagged
    n = len(result.row_ids)
    if quality is None:
        quality = result.extra.get("quality")
    return EvalMetrics(len(found), total, total / n if n else 0.0, result.runtime, quality, found)
