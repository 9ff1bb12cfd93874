"""Seeded synthetic tables: a Gaussian cluster mixture plus linearly correlated features."""
from __future__ import annotations

import numpy as np

from .dataio import ColumnKind, ColumnSchema, Dataset


def synthetic_schema(d: int, id_name: str = "id") -> list[ColumnSchema]:
    return [ColumnSchema(id_name, ColumnKind.IDENTIFIER)] + [
        ColumnSchema(f"f{j:02d}", ColumnKind.CONTINUOUS) for j in range(d)
    ]


def make_mixture(
    n: int = 1000,
    d: int = 13,
    n_clusters: int = 3,
    seed: int = 0,
    n_correlated: int | None = None,
    center_scale: float = 3.0,
    noise: float = 0.15,
    id_prefix: str = "r",
    sample_seed: int | None = None,
) -> Dataset:
    """``d - n_correlated`` base features from an equal-weight Gaussian mixture with
    unit within-cluster spread, and ``n_correlated`` features that are noisy linear
    combinations of two base features each.

    ``seed`` fixes the structure (centres, combination weights); ``sample_seed``
    (default: ``seed``) draws the rows, so a held-out sample from the same
    distribution only changes ``sample_seed``.
    """
    if n_correlated is None:
        n_correlated = max(1, d // 4)
    n_base = d - n_correlated
    if n_base < 2:
        raise ValueError("need at least two base features")
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, center_scale, size=(n_clusters, n_base))
    pairs = [rng.choice(n_base, size=2, replace=False) for _ in range(n_correlated)]
    weights = [rng.uniform(0.5, 1.5, size=2) * rng.choice([-1.0, 1.0], size=2) for _ in range(n_correlated)]
    srng = np.random.default_rng([seed if sample_seed is None else sample_seed, 1])
    comp = srng.integers(n_clusters, size=n)
    base = centers[comp] + srng.standard_normal((n, n_base))
    extra = np.empty((n, n_correlated))
    for c, ((i, j), w) in enumerate(zip(pairs, weights)):
        extra[:, c] = w[0] * base[:, i] + w[1] * base[:, j] + noise * srng.standard_normal(n)
    X = np.hstack([base, extra])
    cols = {"id": [f"{id_prefix}{i}" for i in range(n)]}
    for j in range(d):
        cols[f"f{j:02d}"] = X[:, j]
    return Dataset(synthetic_schema(d), cols)
