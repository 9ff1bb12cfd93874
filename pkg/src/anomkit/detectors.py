"""One entry point for every detector: method name + JSON-style config -> AnomalyResult.

Configs are plain dicts so they can come straight from a preset file or the
command line.  Missing keys fall back to ``DEFAULTS``; auto-tuned methods
(kmeans, dbscan, iforest) run their grid search when ``"tune"`` is true.
Neural methods z-score their input by default (a no-op on data that is
already standardized).
"""
from __future__ import annotations

import time
from typing import Any, Mapping

import numpy as np

from .dataio import Dataset, fit_scaler
from .errors import AnomkitError, TooFewClusters, UnknownMethod
from .hdbscan import HdbscanConfig, hdbscan_detect
from .iforest import IForestConfig, default_iforest_grid, iforest_detect, tune_iforest
from .neural import (
    MlpArch,
    TrainConfig,
    ensemble_detect,
    ensemble_errors,
    percentile_threshold,
    train_ensemble,
)
from .ocsvm import OcsvmConfig, ocsvm_detect
from .proximity import DbscanConfig, KnnConfig, dbscan_detect, kmeans_detect, kmeans_fit, knn_detect
from .result import AnomalyResult, as_dataset
from .scoring import default_kappa_grid, silhouette, tune_dbscan, tune_kmeans

METHODS = (
    "nn", "kmeans", "dbscan", "hdbscan", "ocsvm", "iforest",
    "ae", "vae", "ae-ensemble", "vae-ensemble",
)
NEURAL = ("ae", "vae", "ae-ensemble", "vae-ensemble")

# Ensemble members per dataset width; layer sizes and epochs from the reference
# experiments (small table -> "ds1", wide table -> "ds2").
MEMBER_PRESETS: dict[str, dict[str, list[dict]]] = {
    "ds1": {
        "ae": [
            {"hidden": [6, 3], "latent": 1, "epochs": 549, "lr": 1e-3},
            {"hidden": [64, 32], "latent": 16, "epochs": 347, "lr": 1e-3},
            {"hidden": [32, 16], "latent": 6, "epochs": 450, "lr": 1e-3},
        ],
        "vae": [
            {"hidden": [6, 3], "latent": 1, "epochs": 523, "lr": 1e-3},
            {"hidden": [128, 64], "latent": 32, "epochs": 552, "lr": 1e-3},
            {"hidden": [32, 16], "latent": 16, "epochs": 537, "lr": 1e-3},
        ],
    },
    "ds2": {
        "ae": [
            {"hidden": [25, 12], "latent": 6, "epochs": 450, "lr": 1e-3},
            {"hidden": [64, 32], "latent": 16, "epochs": 450, "lr": 1e-3},
            {"hidden": [64, 32], "latent": 10, "epochs": 350, "lr": 1e-3},
        ],
        "vae": [
            {"hidden": [25, 12], "latent": 6, "epochs": 500, "lr": 1e-2},
            {"hidden": [128, 64], "latent": 32, "epochs": 939, "lr": 1e-2},
            {"hidden": [64, 32], "latent": 10, "epochs": 950, "lr": 1e-2},
        ],
    },
}
WIDE_TABLE = 20  # inputs wider than this default to the "ds2" members

DEFAULTS: dict[str, dict[str, Any]] = {
    "nn": {"k": 3, "m": 2.0},
    "kmeans": {"tune": True, "k": 8, "k_range": list(range(2, 21)), "m": 2.0},
    "dbscan": {"tune": True, "eps": None, "kappa": 10, "kappa_grid": None},
    "hdbscan": {"kappa": 10, "min_cluster_size": 5},
    "ocsvm": {"nu": 0.1, "gamma": None, "tol": 1e-4, "max_iter": 10000},
    "iforest": {"tune": True, "n_est": 50, "s_max": 0.5, "f_max": 1.0, "grid": None},
    "ae": {"members": None, "widths": None, "t": 0.5, "t_percentile": None, "standardize": True},
    "vae": {"members": None, "widths": None, "t": 0.5, "t_percentile": None, "standardize": True, "beta": 1.0},
}
DEFAULTS["ae-ensemble"] = DEFAULTS["ae"]
DEFAULTS["vae-ensemble"] = DEFAULTS["vae"]


def resolve_config(method: str, config: Mapping[str, Any] | None, n_features: int) -> dict[str, Any]:
    """Defaults overlaid with ``config``; unknown keys are rejected."""
    if method not in METHODS:
        raise UnknownMethod(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    out = dict(DEFAULTS[method])
    config = dict(config or {})
    extra = set(config) - set(out) - {"seed"}
    if extra:
        raise AnomkitError(f"unknown config keys for {method}: {sorted(extra)}")
    out.update(config)
    if method in NEURAL and out["members"] is None:
        widths = out["widths"] or ("ds2" if n_features > WIDE_TABLE else "ds1")
        members = MEMBER_PRESETS[widths]["vae" if method.startswith("vae") else "ae"]
        out["members"] = [dict(m) for m in (members if method.endswith("ensemble") else members[:1])]
        out["widths"] = widths
    return out


def _members(cfg: Mapping, d: int, beta: float) -> list[tuple[MlpArch, TrainConfig]]:
    members = []
    for m in cfg["members"]:
        arch = MlpArch(d, tuple(m["hidden"]), int(m["latent"]))
        train = TrainConfig(float(m.get("lr", 1e-3)), int(m["epochs"]), int(m.get("batch_size", 32)),
                            0, float(m.get("beta", beta)))
        members.append((arch, train))
    return members


def _quality(X: np.ndarray, labels: np.ndarray) -> float | None:
    try:
        return silhouette(X, labels, exclude_noise=True)
    except TooFewClusters:
        return None


def run_method(method: str, data, config: Mapping[str, Any] | None = None, seed: int = 0,
               holdout=None) -> tuple[AnomalyResult, dict[str, Any]]:
    """Run one detector and return its result plus the fully resolved config.

    ``runtime`` on the result covers fitting, tuning and scoring, not I/O.
    ``holdout`` (clean rows, same columns) is only used by neural methods in
    percentile-threshold mode: ``t`` becomes that percentile of the holdout's
    ensemble errors instead of the scored rows' own errors.
    """
    ds = as_dataset(data)
    cfg = resolve_config(method, config, len(ds.feature_names))
    seed = int(cfg.pop("seed", seed))
    X = ds.matrix()
    t0 = time.perf_counter()
    if method == "nn":
        res = knn_detect(ds, KnnConfig(int(cfg["k"]), float(cfg["m"])))
    elif method == "kmeans":
        if cfg["tune"]:
            tuning = tune_kmeans(X, cfg["k_range"], seed=seed, m=cfg["m"])
            model, cfg["k"] = tuning.model, tuning.best_k
            cfg["trace"] = tuning.trace
        else:
            model = kmeans_fit(X, int(cfg["k"]), seed=seed)
        res = kmeans_detect(model, ds, float(cfg["m"]))
        res.extra["quality"] = _quality(X, model.assignments)
    elif method == "dbscan":
        if cfg["tune"]:
            grid = cfg["kappa_grid"] or default_kappa_grid(X.shape[1])
            tuning = tune_dbscan(X, grid, seed=seed)
            cfg.update(eps=tuning.eps, kappa=tuning.kappa, kappa_grid=list(grid), trace=tuning.trace)
        if cfg["eps"] is None:
            raise AnomkitError("dbscan needs eps unless tune is true")
        res = dbscan_detect(ds, DbscanConfig(float(cfg["eps"]), int(cfg["kappa"])))
        res.extra["quality"] = _quality(X, res.extra["labels"])
    elif method == "hdbscan":
        res = hdbscan_detect(ds, HdbscanConfig(int(cfg["kappa"]), int(cfg["min_cluster_size"])))
        res.extra["quality"] = _quality(X, res.extra["labels"])
    elif method == "ocsvm":
        gamma = None if cfg["gamma"] is None else float(cfg["gamma"])
        res = ocsvm_detect(ds, OcsvmConfig(float(cfg["nu"]), gamma, float(cfg["tol"]), int(cfg["max_iter"])))
    elif method == "iforest":
        if cfg["tune"]:
            grid = cfg["grid"]
            grid = default_iforest_grid() if grid is None else [IForestConfig(**g) for g in grid]
            tuning = tune_iforest(X, grid, seed=seed)
            best = tuning.best
            cfg["trace"] = tuning.trace
        else:
            best = IForestConfig(int(cfg["n_est"]), float(cfg["s_max"]), float(cfg["f_max"]), seed)
        cfg.update(n_est=best.n_est, s_max=best.s_max, f_max=best.f_max, forest_seed=best.seed)
        res = iforest_detect(ds, best)
        res.extra["quality"] = res.extra["mean_score"]
    else:
        res = _run_neural(method, ds, cfg, seed, holdout)
    res.method = method
    res.runtime = time.perf_counter() - t0
    return res, cfg


def _run_neural(method: str, ds: Dataset, cfg: dict, seed: int, holdout) -> AnomalyResult:
    kind = "vae" if method.startswith("vae") else "ae"
    hold = None if holdout is None else as_dataset(holdout)
    if cfg["standardize"]:
        scaler = fit_scaler(ds)
        ds = scaler.transform(ds)
        hold = None if hold is None else scaler.transform(hold)
    X = ds.matrix()
    members = _members(cfg, X.shape[1], float(cfg.get("beta", 1.0)))
    models = train_ensemble(X, members, kind, seed=seed)
    if cfg["t_percentile"] is not None:
        ref = X if hold is None else hold.matrix()
        cfg["t"] = percentile_threshold(ensemble_errors(models, ref), float(cfg["t_percentile"]))
    res = ensemble_detect(models, ds, float(cfg["t"]), method)
    res.extra["final_losses"] = [m.final_loss for m in models]
    return res
