"""Seeded end-to-end scenarios shared by the acceptance suite and the scripts."""
from __future__ import annotations

from typing import Any

import numpy as np

from .benchmark import run_benchmark
from .report import BenchmarkReport
from .synthetic import make_mixture

DESK_METHODS = ("nn", "dbscan", "iforest", "ae-ensemble")


def desk_configs() -> dict[str, dict[str, Any]]:
    """Fixed iForest parameters, auto-tuned DBSCAN, AE threshold at the 97th holdout percentile."""
    return {
        "nn": {"k": 3, "m": 2.0},
        "dbscan": {"tune": True},
        "iforest": {"tune": False, "n_est": 50, "s_max": 0.5, "f_max": 1.0},
        "ae-ensemble": {"widths": "ds1", "t_percentile": 97.0},
    }


def holdout_seed(master_seed: int) -> int:
    return int(np.random.SeedSequence([master_seed, 1000]).generate_state(1)[0])


def desk_benchmark(master_seed: int = 0, n: int = 1000, d: int = 13, methods=DESK_METHODS,
                   configs: dict | None = None, timeout: float | None = None,
                   parallel: bool = False) -> BenchmarkReport:
    """Three-cluster mixture with correlated features, four injected anomalies.

    The holdout is a second clean sample from the same mixture (same structure
    seed, different row seed), standardized with the scaler of the scored data.
    """
    ds = make_mixture(n=n, d=d, n_clusters=3, seed=master_seed)
    holdout = make_mixture(n=n, d=d, n_clusters=3, seed=master_seed,
                           sample_seed=holdout_seed(master_seed), id_prefix="h")
    cfg = desk_configs()
    cfg.update(configs or {})
    report, _ = run_benchmark(
        ds, list(methods), master_seed=master_seed, configs=cfg, timeout=timeout,
        parallel=parallel, holdout=holdout, dataset_name=f"synthetic-n{n}-d{d}",
    )
    return report
