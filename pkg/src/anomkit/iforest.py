"""Isolation forest with axis-parallel random splits.

Reported score for a row is ``1 - 2 s`` with ``s = 2 ** (-E[h] / c(psi))``:
it lies in (-1, 1), is 0 when the mean path length equals ``c(psi)`` and is
negative (flagged) for rows isolated faster than average.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import SampleTooSmall
from .result import AnomalyResult, as_matrix

EULER_GAMMA = 0.5772156649


@dataclass(frozen=True)
class IForestConfig:
    n_est: int = 100
    s_max: float = 1.0
    f_max: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_est < 1:
            raise ValueError("n_est must be >= 1")
        if not 0 < self.s_max <= 1:
            raise ValueError("s_max must lie in (0, 1]")
        if not 0 < self.f_max <= 1:
            raise ValueError("f_max must lie in (0, 1]")

    def sample_size(self, n: int) -> int:
        return int(self.s_max * n)

    def feature_count(self, d: int) -> int:
        return max(1, int(self.f_max * d))


@dataclass
class ITree:
    """Flat binary tree; ``left == -1`` marks a leaf holding ``size`` training points."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    height_limit: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


def avg_path_length(n) -> np.ndarray | float:
    """Average unsuccessful-search path length in a random BST of ``n`` keys."""
    arr = np.asarray(n, dtype=np.float64)
    out = np.zeros_like(arr)
    big = arr > 2
    out[arr == 2] = 1.0
    m = arr[big]
    out[big] = 2.0 * (np.log(m - 1.0) + EULER_GAMMA) - 2.0 * (m - 1.0) / m
    return float(out) if out.ndim == 0 else out


def build_itree(sample: np.ndarray, features, rng: np.random.Generator, height_limit: int | None = None) -> ITree:
    """Grow one isolation tree on ``sample`` using only the given feature columns.

    Splits stop at the height limit (default ``ceil(log2 |sample|)``), at a
    single point, or when the slice is constant on every allowed feature.
    """
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim == 1:
        sample = sample[:, None]
    psi = sample.shape[0]
    if psi < 1:
        raise ValueError("sample must hold at least one row")
    features = np.asarray(features, dtype=np.intp)
    if height_limit is None:
        height_limit = int(math.ceil(math.log2(psi))) if psi > 1 else 0
    feat, thr, left, right, size = [], [], [], [], []

    def new_node():
        feat.append(-1)
        thr.append(np.nan)
        left.append(-1)
        right.append(-1)
        size.append(0)
        return len(feat) - 1

    root = new_node()
    stack = [(root, np.arange(psi), 0)]
    while stack:
        node, idx, depth = stack.pop()
        size[node] = len(idx)
        if depth >= height_limit or len(idx) <= 1:
            continue
        sub = sample[np.ix_(idx, features)]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        splittable = np.flatnonzero(hi > lo)
        if splittable.size == 0:
            continue
        # uniform over the tree's features; constant ones are redrawn
        while True:
            q = int(rng.integers(len(features)))
            if hi[q] > lo[q]:
                break
        while True:
            p = float(rng.uniform(lo[q], hi[q]))
            if lo[q] < p < hi[q]:
                break
        go_left = sub[:, q] < p
        l, r = new_node(), new_node()
        feat[node], thr[node], left[node], right[node] = int(features[q]), p, l, r
        stack.append((r, idx[~go_left], depth + 1))
        stack.append((l, idx[go_left], depth + 1))
    return ITree(
        np.array(feat, dtype=np.intp),
        np.array(thr),
        np.array(left, dtype=np.intp),
        np.array(right, dtype=np.intp),
        np.array(size, dtype=np.intp),
        height_limit,
    )


def path_lengths(tree: ITree, X: np.ndarray) -> np.ndarray:
    """Leaf depth plus ``c(leaf size)`` for every row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    node = np.zeros(X.shape[0], dtype=np.intp)
    depth = np.zeros(X.shape[0])
    active = tree.left[node] >= 0
    rows = np.arange(X.shape[0])
    while active.any():
        r = rows[active]
        nd = node[r]
        go_left = X[r, tree.feature[nd]] < tree.threshold[nd]
        node[r] = np.where(go_left, tree.left[nd], tree.right[nd])
        depth[r] += 1
        active[r] = tree.left[node[r]] >= 0
    return depth + avg_path_length(tree.size[node])


def path_length(tree: ITree, x) -> float:
    return float(path_lengths(tree, np.asarray(x, dtype=np.float64)[None, :])[0])


@dataclass
class IsolationForest:
    trees: list[ITree]
    psi: int
    config: IForestConfig
    tree_features: list[np.ndarray] = field(default_factory=list)

    def mean_path_length(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        total = np.zeros(X.shape[0])
        for t in self.trees:
            total += path_lengths(t, X)
        return total / len(self.trees)

    def score(self, X) -> np.ndarray:
        s = 2.0 ** (-self.mean_path_length(X) / avg_path_length(self.psi))
        return 1.0 - 2.0 * s


def tree_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def fit_iforest(data, cfg: IForestConfig) -> IsolationForest:
    X, _ = as_matrix(data)
    n, d = X.shape
    psi = cfg.sample_size(n)
    if psi < 2:
        raise SampleTooSmall(f"sample size int({cfg.s_max} * {n}) = {psi} is below 2")
    n_feat = cfg.feature_count(d)
    trees, feats = [], []
    for t in range(cfg.n_est):
        rng = tree_rng(cfg.seed, t)
        rows = rng.choice(n, size=psi, replace=False)
        cols = np.sort(rng.choice(d, size=n_feat, replace=False)) if n_feat < d else np.arange(d)
        trees.append(build_itree(X[rows], cols, rng))
        feats.append(cols)
    return IsolationForest(trees, psi, cfg, feats)


def iforest_detect(data, cfg: IForestConfig) -> AnomalyResult:
    """Fit a forest, score every row, flag negative scores.

    ``extra["mean_score"]`` is the dataset-mean score.
    """
    X, ids = as_matrix(data)
    t0 = time.perf_counter()
    forest = fit_iforest(X, cfg)
    scores = forest.score(X)
    runtime = time.perf_counter() - t0
    return AnomalyResult(
        "iforest", ids, scores, scores < 0, 0.0, runtime, higher_is_anomalous=False,
        extra={"mean_score": float(scores.mean()), "psi": forest.psi},
    )


@dataclass
class IForestTuning:
    best: IForestConfig
    best_index: int
    mean_scores: list[float]
    trace: list[dict]


def default_iforest_grid(seed: int = 0) -> list[IForestConfig]:
    return [
        IForestConfig(n_est=n, s_max=s, f_max=f, seed=seed)
        for f in (0.5, 1.0)
        for s in (0.25, 0.5, 1.0)
        for n in (50, 100)
    ]


def tune_iforest(data, grid, seed: int = 0) -> IForestTuning:
    """Grid search maximising the dataset-mean score; ties go to the earlier config.

    Config ``i`` is fitted with the seed stream ``[seed, i]`` regardless of the
    seed stored on the config.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be non-empty")
    X, _ = as_matrix(data)
    means, trace = [], []
    for i, cfg in enumerate(grid):
        derived = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        run_cfg = IForestConfig(cfg.n_est, cfg.s_max, cfg.f_max, derived)
        t0 = time.perf_counter()
        res = iforest_detect(X, run_cfg)
        m = res.extra["mean_score"]
        means.append(m)
        trace.append({
            "config": {"n_est": cfg.n_est, "s_max": cfg.s_max, "f_max": cfg.f_max, "seed": derived},
            "quality": m,
            "runtime": time.perf_counter() - t0,
        })
    best_index = int(np.argmax(means))
    best = grid[best_index]
    best = IForestConfig(best.n_est, best.s_max, best.f_max, trace[best_index]["config"]["seed"])
    return IForestTuning(best, best_index, means, trace)
