"""Hierarchical density clustering; points left outside every selected cluster are anomalies.

Pipeline: core distances -> mutual-reachability MST (Prim over the implicit
complete graph) -> single-linkage merge order -> condensed tree -> excess-of-mass
cluster selection.  Cluster nodes of the condensed tree are numbered from ``n``
upwards (``n`` is the root); point leaves keep their row index.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .distance import knn_distances, row_distances
from .errors import KTooLarge
from .result import AnomalyResult, as_matrix


@dataclass(frozen=True)
class HdbscanConfig:
    kappa: int = 5
    min_cluster_size: int = 5

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.min_cluster_size < 2:
            raise ValueError("min_cluster_size must be >= 2")


@dataclass
class CondensedTree:
    """Rows ``(parent, child, lam, child_size)``; ``lam`` is 1/distance of departure."""

    n_points: int
    min_cluster_size: int
    parent: np.ndarray
    child: np.ndarray
    lam: np.ndarray
    child_size: np.ndarray

    @property
    def root(self) -> int:
        return self.n_points

    def cluster_ids(self) -> np.ndarray:
        kids = self.child[self.child >= self.n_points]
        return np.concatenate([[self.root], np.sort(kids)]).astype(np.intp)

    def birth_lambda(self) -> dict[int, float]:
        births = {self.root: 0.0}
        for c, lam in zip(self.child, self.lam):
            if c >= self.n_points:
                births[int(c)] = float(lam)
        return births

    def to_records(self) -> list[dict]:
        return [
            {"parent": int(p), "child": int(c), "lambda": float(lam), "size": int(s)}
            for p, c, lam, s in zip(self.parent, self.child, self.lam, self.child_size)
        ]


def core_distances(data, kappa: int) -> np.ndarray:
    """Distance from each row to its ``kappa``-th nearest other row."""
    X, _ = as_matrix(data)
    n = X.shape[0]
    if not 1 <= kappa <= n - 1:
        raise KTooLarge(f"kappa={kappa} needs 1 <= kappa <= n-1 = {n - 1}")
    dist, _ = knn_distances(X, kappa)
    return dist[:, kappa - 1].copy()


def mutual_reachability(data, core: np.ndarray, i: int, j: int) -> float:
    X, _ = as_matrix(data)
    if i == j:
        raise ValueError("mutual reachability needs two distinct rows")
    d = float(np.sqrt(((X[i] - X[j]) ** 2).sum()))
    return max(float(core[i]), float(core[j]), d)


def _key_less(lo_a, hi_a, lo_b, hi_b):
    return (lo_a < lo_b) | ((lo_a == lo_b) & (hi_a < hi_b))


def build_mst(data, core: np.ndarray) -> np.ndarray:
    """Minimum spanning tree of the mutual-reachability graph as an (n-1) x 3 array.

    Rows are ``(i, j, weight)`` in the order Prim adds them; equal weights are
    resolved by the smaller ``(min id, max id)`` pair.
    """
    X, _ = as_matrix(data)
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least two rows for a spanning tree")
    core = np.asarray(core, dtype=np.float64)
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    src = np.full(n, -1, dtype=np.intp)
    idx = np.arange(n)
    edges = np.empty((n - 1, 3))
    v = 0
    for step in range(n - 1):
        in_tree[v] = True
        mr = np.maximum(np.maximum(core, core[v]), row_distances(X, X[v]))
        lo_new, hi_new = np.minimum(idx, v), np.maximum(idx, v)
        lo_old, hi_old = np.minimum(idx, src), np.maximum(idx, src)
        better = (mr < best) | ((mr == best) & ((src < 0) | _key_less(lo_new, hi_new, lo_old, hi_old)))
        better &= ~in_tree
        best[better] = mr[better]
        src[better] = v
        w = np.where(in_tree, np.inf, best)
        cand = np.flatnonzero(w == w.min())
        if cand.size > 1:
            lo, hi = np.minimum(cand, src[cand]), np.maximum(cand, src[cand])
            nxt = int(cand[np.lexsort((hi, lo))[0]])
        else:
            nxt = int(cand[0])
        edges[step] = (src[nxt], nxt, best[nxt])
        v = nxt
    return edges


def _single_linkage(edges: np.ndarray, n: int) -> np.ndarray:
    """Merge table ``(left, right, weight, size)``; merge ``r`` creates node ``n + r``."""
    i = edges[:, 0].astype(np.intp)
    j = edges[:, 1].astype(np.intp)
    w = edges[:, 2]
    order = np.lexsort((np.maximum(i, j), np.minimum(i, j), w))
    parent = np.arange(2 * n - 1)
    size = np.zeros(2 * n - 1, dtype=np.intp)
    size[:n] = 1

    def find(a):
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    out = np.empty((n - 1, 4))
    for r, e in enumerate(order):
        a, b = find(i[e]), find(j[e])
        node = n + r
        parent[a] = parent[b] = node
        size[node] = size[a] + size[b]
        out[r] = (a, b, w[e], size[node])
    return out


def condense_tree(mst: np.ndarray, min_cluster_size: int) -> CondensedTree:
    """Condense the single-linkage hierarchy of ``mst``.

    Edges are cut from heaviest to lightest.  A side smaller than
    ``min_cluster_size`` drops its points out of the current cluster at
    ``lam = 1/weight``; when both sides are large enough they become new clusters.
    """
    mst = np.asarray(mst, dtype=np.float64).reshape(-1, 3)
    n = mst.shape[0] + 1
    root_node = 2 * n - 2
    if n == 1:
        return CondensedTree(1, min_cluster_size, np.array([1]), np.array([0]), np.array([np.inf]), np.array([1]))
    link = _single_linkage(mst, n)

    def size_of(node: int) -> int:
        return 1 if node < n else int(link[node - n, 3])

    def leaves(node: int) -> list[int]:
        out, stack = [], [node]
        while stack:
            x = stack.pop()
            if x < n:
                out.append(x)
            else:
                stack.extend((int(link[x - n, 0]), int(link[x - n, 1])))
        return sorted(out)

    label = {root_node: n}
    next_label = n + 1
    rows: list[tuple[int, int, float, int]] = []
    stack = [root_node]
    while stack:
        node = stack.pop()
        left, right, w = int(link[node - n, 0]), int(link[node - n, 1]), link[node - n, 2]
        lam = 1.0 / w if w > 0 else np.inf
        me = label[node]
        ls, rs = size_of(left), size_of(right)
        big_l, big_r = ls >= min_cluster_size, rs >= min_cluster_size
        if big_l and big_r:
            for ch, sz in ((left, ls), (right, rs)):
                label[ch] = next_label
                rows.append((me, next_label, lam, sz))
                next_label += 1
                if ch >= n:
                    stack.append(ch)
            continue
        for ch, big in ((left, big_l), (right, big_r)):
            if big:
                label[ch] = me
                if ch >= n:
                    stack.append(ch)
            else:
                rows.extend((me, p, lam, 1) for p in leaves(ch))
    arr = np.array(rows, dtype=object)
    return CondensedTree(
        n,
        min_cluster_size,
        arr[:, 0].astype(np.intp),
        arr[:, 1].astype(np.intp),
        arr[:, 2].astype(np.float64),
        arr[:, 3].astype(np.intp),
    )


def cluster_stability(tree: CondensedTree) -> dict[int, float]:
    """``sum over departures of (lam - lam_birth) * size`` for every cluster node."""
    births = tree.birth_lambda()
    stab = {int(c): 0.0 for c in tree.cluster_ids()}
    for p, lam, s in zip(tree.parent, tree.lam, tree.child_size):
        b = births[int(p)]
        # both infinite: duplicate points born and gone at the same level
        contrib = 0.0 if lam == b else (lam - b) * s
        stab[int(p)] += contrib
    return stab


def select_clusters(tree: CondensedTree) -> tuple[np.ndarray, dict[int, float]]:
    """Excess-of-mass selection; returns point labels (``-1`` = noise) and stabilities.

    Walking bottom-up, a cluster replaces its selected descendants when its own
    stability exceeds their summed stability.  The root competes only when it
    never splits (a single cluster, so one blob is not all noise); otherwise its
    stability, counted from ``lam = 0``, would swamp every split.  A cluster
    smaller than ``min_cluster_size`` (only possible for the root) is never selected.
    """
    n = tree.n_points
    stab = cluster_stability(tree)
    sizes = {tree.root: n}
    children: dict[int, list[int]] = {int(c): [] for c in tree.cluster_ids()}
    cluster_parent: dict[int, int] = {}
    point_parent = np.full(n, -1, dtype=np.intp)
    for p, c, s in zip(tree.parent, tree.child, tree.child_size):
        if c >= n:
            children[int(p)].append(int(c))
            cluster_parent[int(c)] = int(p)
            sizes[int(c)] = int(s)
        else:
            point_parent[c] = p

    selected: dict[int, bool] = {}
    subtree = {}
    for c in sorted(children, reverse=True):
        kids = children[c]
        child_sum = sum(subtree[k] for k in kids)
        eligible = sizes[c] >= tree.min_cluster_size and (c != tree.root or not kids)
        if eligible and (not kids or stab[c] > child_sum):
            selected[c] = True
            subtree[c] = stab[c]
            stack = list(kids)
            while stack:
                k = stack.pop()
                selected[k] = False
                stack.extend(children[k])
        else:
            selected[c] = False
            subtree[c] = child_sum

    chosen = sorted(c for c, s in selected.items() if s)
    number = {c: i for i, c in enumerate(chosen)}
    labels = np.full(n, -1, dtype=np.intp)
    for p in range(n):
        c = int(point_parent[p])
        while c >= 0:
            if selected.get(c):
                labels[p] = number[c]
                break
            c = cluster_parent.get(c, -1)
    return labels, {c: stab[c] for c in chosen}


def hdbscan_labels(data, cfg: HdbscanConfig) -> tuple[np.ndarray, CondensedTree]:
    X, _ = as_matrix(data)
    core = core_distances(X, cfg.kappa)
    mst = build_mst(X, core)
    tree = condense_tree(mst, cfg.min_cluster_size)
    labels, _ = select_clusters(tree)
    return labels, tree


def hdbscan_detect(data, cfg: HdbscanConfig = HdbscanConfig()) -> AnomalyResult:
    X, ids = as_matrix(data)
    t0 = time.perf_counter()
    labels, _ = hdbscan_labels(X, cfg)
    flags = labels == -1
    return AnomalyResult(
        "hdbscan", ids, flags.astype(float), flags, 0.5, time.perf_counter() - t0,
        extra={"labels": labels, "kappa": cfg.kappa, "min_cluster_size": cfg.min_cluster_size},
    )
