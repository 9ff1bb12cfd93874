"""nu-one-class SVM with an RBF kernel, solved in the dual by pairwise (SMO) updates.

Dual problem::

    minimise    1/2 a^T K a
    subject to  0 <= a_i <= 1 / (nu n),   sum_i a_i = 1

Each step picks the maximal KKT-violating pair and solves the two-variable
sub-problem in closed form.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence
from .result import AnomalyResult, as_matrix

# above this many rows kernel rows are computed on demand instead of cached
DENSE_KERNEL_LIMIT = 4000


@dataclass(frozen=True)
class OcsvmConfig:
    nu: float = 0.1
    gamma: float | None = None  # None -> 1 / n_features
    tol: float = 1e-4
    max_iter: int = 10_000

    def __post_init__(self):
        if not 0 < self.nu <= 1:
            raise ValueError("nu must lie in (0, 1]")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be > 0")


@dataclass
class OcsvmModel:
    alpha: np.ndarray
    rho: float
    gamma: float
    nu: float
    support: np.ndarray
    support_vectors: np.ndarray
    n_iter: int
    violation: float
    converged: bool

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        K = rbf_matrix(X, self.support_vectors, self.gamma)
        return K @ self.alpha[self.support] - self.rho

    def dual_objective(self, X) -> float:
        K = rbf_matrix(X, X, self.gamma)
        return 0.5 * float(self.alpha @ K @ self.alpha)


def rbf_kernel(x, y, gamma: float) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("rbf_kernel needs vectors of equal dimension")
    return float(np.exp(-gamma * np.sum((x - y) ** 2)))


def rbf_matrix(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


class _KernelRows:
    def __init__(self, X: np.ndarray, gamma: float):
        self.X = X
        self.gamma = gamma
        self.full = rbf_matrix(X, X, gamma) if X.shape[0] <= DENSE_KERNEL_LIMIT else None
        self.cache: dict[int, np.ndarray] = {}

    def row(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        r = self.cache.get(i)
        if r is None:
            if len(self.cache) > 512:
                self.cache.clear()
            r = rbf_matrix(self.X[i : i + 1], self.X, self.gamma)[0]
            self.cache[i] = r
        return r

    def diag(self, i: int) -> float:
        return 1.0


def fit_ocsvm(data, cfg: OcsvmConfig = OcsvmConfig()) -> OcsvmModel:
    X, _ = as_matrix(data)
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, d = X.shape
    if n < 2:
        raise ValueError("OCSVM needs at least two rows")
    gamma = cfg.gamma if cfg.gamma is not None else 1.0 / max(d, 1)
    C = 1.0 / (cfg.nu * n)
    K = _KernelRows(X, gamma)

    # feasible start: the first floor(nu n) coefficients at the bound
    alpha = np.zeros(n)
    n_full = int(cfg.nu * n)
    alpha[:n_full] = C
    if n_full < n:
        alpha[n_full] = 1.0 - n_full * C
    alpha = np.clip(alpha, 0.0, C)
    G = np.zeros(n)
    for i in np.flatnonzero(alpha):
        G += alpha[i] * K.row(i)

    eps = 1e-12 * C
    n_iter = 0
    violation = np.inf
    while True:
        up = alpha < C - eps  # may increase
        low = alpha > eps  # may decrease
        # increasing a_i and decreasing a_j by t changes the objective by t (G_i - G_j) + O(t^2)
        Gu = np.where(up, G, np.inf)
        Gl = np.where(low, G, -np.inf)
        i = int(np.argmin(Gu))
        j = int(np.argmax(Gl))
        violation = float(Gl[j] - Gu[i])
        if violation < cfg.tol or n_iter >= cfg.max_iter:
            break
        Ki, Kj = K.row(i), K.row(j)
        quad = max(Ki[i] + Kj[j] - 2.0 * Ki[j], 1e-12)
        t = (G[j] - G[i]) / quad
        t = min(t, C - alpha[i], alpha[j])
        alpha[i] += t
        alpha[j] -= t
        G += t * (Ki - Kj)
        n_iter += 1

    converged = violation < cfg.tol
    if not converged and violation > 10 * cfg.tol:
        warnings.warn(
            f"OCSVM stopped after {n_iter} updates with KKT violation {violation:.3g}",
            NoConvergence,
            stacklevel=2,
        )
    # rho = smallest gradient among coefficients below the bound.  At the exact
    # optimum this equals every free support vector's value; with a finite tol
    # it keeps all a_i < C rows at score >= 0 (free ones within tol of 0), so
    # only bound rows, at most nu n of them, can be labelled anomalous.
    below = alpha < C - eps
    rho = float(G[below].min()) if below.any() else float(G.max())
    support = np.flatnonzero(alpha > eps)
    return OcsvmModel(alpha, rho, gamma, cfg.nu, support, X[support].copy(), n_iter, violation, converged)


def ocsvm_predict(model: OcsvmModel, x) -> tuple[float, int]:
    """Decision score of one row and its label (+1 normal, -1 anomaly)."""
    score = float(model.decision_function(np.asarray(x, dtype=np.float64)[None, :])[0])
    return score, 1 if score >= 0 else -1


def ocsvm_detect(data, cfg: OcsvmConfig = OcsvmConfig()) -> AnomalyResult:
    X, ids = as_matrix(data)
    t0 = time.perf_counter()
    model = fit_ocsvm(X, cfg)
    scores = model.decision_function(X)
    flags = scores < 0
    return AnomalyResult(
        "ocsvm", ids, scores, flags, 0.0, time.perf_counter() - t0, higher_is_anomalous=False,
        extra={"nu": cfg.nu, "gamma": model.gamma, "converged": model.converged},
    )
