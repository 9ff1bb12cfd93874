"""Slow, obviously-correct reference implementations used as test oracles.

None of these share code with the package: full distance matrices, explicit
graphs and textbook algorithms only.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def distance_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            # squares by multiplication: pow(x, 2) is not always correctly rounded
            D[i, j] = math.sqrt(sum((a - b) * (a - b) for a, b in zip(X[i], X[j])))
    return D


def knn_scores(X, k: int) -> np.ndarray:
    D = distance_matrix(X)
    n = D.shape[0]
    out = np.empty(n)
    for i in range(n):
        others = sorted((D[i, j], j) for j in range(n) if j != i)
        out[i] = sum(d for d, _ in others[:k]) / k
    return out


def kth_other(X, k: int) -> np.ndarray:
    D = distance_matrix(X)
    n = D.shape[0]
    return np.array([sorted(D[i, j] for j in range(n) if j != i)[k - 1] for i in range(n)])


def dbscan_partition(X, eps: float, kappa: int):
    """(core mask, noise mask, list of clusters as frozensets of core points).

    Clusters are connected components of the core-core eps graph; border
    points are excluded since their assignment depends on scan order.
    """
    D = distance_matrix(X)
    n = D.shape[0]
    nbr = D <= eps
    core = nbr.sum(axis=1) >= kappa
    comp = list(range(n))

    def find(a):
        while comp[a] != a:
            comp[a] = comp[comp[a]]
            a = comp[a]
        return a

    for i in range(n):
        for j in range(n):
            if core[i] and core[j] and nbr[i, j]:
                comp[find(i)] = find(j)
    clusters = {}
    for i in range(n):
        if core[i]:
            clusters.setdefault(find(i), set()).add(i)
    reach = np.array([core[i] or any(core[j] and nbr[i, j] for j in range(n)) for i in range(n)])
    return core, ~reach, [frozenset(c) for c in clusters.values()]


def silhouette(X, labels, exclude_noise=True) -> float:
    D = distance_matrix(X)
    labels = list(labels)
    idx = [i for i, l in enumerate(labels) if not (exclude_noise and l == -1)]
    groups = {}
    for i in idx:
        groups.setdefault(labels[i], []).append(i)
    vals = []
    for i in idx:
        own = groups[labels[i]]
        if len(own) == 1:
            vals.append(0.0)
            continue
        a = sum(D[i, j] for j in own if j != i) / (len(own) - 1)
        b = min(sum(D[i, j] for j in g) / len(g) for l, g in groups.items() if l != labels[i])
        top = max(a, b)
        vals.append(0.0 if top == 0 else (b - a) / top)
    return sum(vals) / len(vals)


def kruskal_mst(W: np.ndarray) -> list[tuple[int, int, float]]:
    """MST of a dense symmetric weight matrix with (w, i, j) tie order."""
    n = W.shape[0]
    edges = sorted((W[i, j], i, j) for i in range(n) for j in range(i + 1, n))
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    tree = []
    for w, i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            tree.append((i, j, w))
    return tree


def mutual_reachability_matrix(X, kappa: int) -> np.ndarray:
    D = distance_matrix(X)
    core = kth_other(X, kappa)
    return np.maximum(D, np.maximum(core[:, None], core[None, :]))


def ocsvm_dual_reference(K: np.ndarray, nu: float, iters: int = 100000, tol: float = 1e-12) -> np.ndarray:
    """Projected gradient descent on 1/2 a'Ka over {0 <= a <= 1/(nu n), sum a = 1}.

    The projection onto the capped simplex is found by bisection on the shift.
    """
    n = K.shape[0]
    C = 1.0 / (nu * n)

    def project(v):
        lo, hi = v.min() - C - 1.0, v.max() + 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.clip(v - mid, 0.0, C).sum() > 1.0:
                lo = mid
            else:
                hi = mid
        return np.clip(v - 0.5 * (lo + hi), 0.0, C)

    a = project(np.full(n, 1.0 / n))
    step = 1.0 / max(np.linalg.eigvalsh(K).max(), 1e-12)
    prev = math.inf
    for _ in range(iters):
        a = project(a - step * (K @ a))
        obj = 0.5 * a @ K @ a
        if prev - obj < tol:
            break
        prev = obj
    return a


def central_difference(f, params: dict, eps: float = 1e-5) -> dict:
    """Numerical gradient of scalar ``f()`` w.r.t. every entry of every array in ``params``."""
    grads = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        for idx in itertools.product(*(range(s) for s in arr.shape)):
            old = arr[idx]
            arr[idx] = old + eps
            up = f()
            arr[idx] = old - eps
            down = f()
            arr[idx] = old
            g[idx] = (up - down) / (2 * eps)
        grads[name] = g
    return grads
