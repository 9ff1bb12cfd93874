"""Inject, detect, evaluate: the full benchmark loop with per-method time limits.

With a time limit each method runs in a child process; one that has not
answered when its limit expires is killed and reported as DNF, and the
remaining methods carry on.  Without a limit methods run in-process.
"""
from __future__ import annotations

import multiprocessing as mp
import os
import platform
import time
import traceback
from multiprocessing.connection import wait
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .dataio import Dataset, InjectionRecord, fit_scaler, inject_anomalies
from .detectors import METHODS, NEURAL, run_method
from .errors import UnknownMethod
from .report import BenchmarkReport, MethodRow
from .scoring import evaluate_run

DEFAULT_TIMEOUT = 600.0
SEED_ENV = "ANOMKIT_SEED"


def default_seed(fallback: int = 0) -> int:
    """Master seed from ``ANOMKIT_SEED`` if set, else ``fallback``."""
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw not in (None, "") else fallback


def method_seed(master: int, method: str) -> int:
    """Per-method seed; keyed on the method's fixed position so subsets keep their seeds."""
    return int(np.random.SeedSequence([master, METHODS.index(method)]).generate_state(1)[0])


def inject_seed_for(master: int) -> int:
    return int(np.random.SeedSequence([master, len(METHODS)]).generate_state(1)[0])


def hardware_info() -> dict[str, Any]:
    return {
        "platform": platform.platform(),
        "machine": platform.machine(),
        "processor": platform.processor(),
        "python": platform.python_version(),
        "cpu_count": os.cpu_count(),
    }


def _child(conn, method, data, config, seed, holdout):
    try:
        res, cfg = run_method(method, data, config, seed, holdout)
        conn.send(("ok", res, cfg))
    except BaseException as exc:  # reported to the parent, never raised in the child
        conn.send(("error", f"{type(exc).__name__}: {exc}", traceback.format_exc()))
    finally:
        conn.close()


def _context():
    methods = mp.get_all_start_methods()
    return mp.get_context("fork" if "fork" in methods else methods[0])


def _run_isolated(jobs: list[tuple], timeouts: list[float | None], parallel: bool) -> list[tuple]:
    """Run ``(method, data, config, seed, holdout)`` jobs in child processes.

    Returns ``(status, payload, extra, elapsed)`` per job in input order.
    """
    ctx = _context()
    out: list[tuple | None] = [None] * len(jobs)
    pending = list(range(len(jobs)))
    while pending:
        batch = pending if parallel else pending[:1]
        pending = [] if parallel else pending[1:]
        live = {}
        for i in batch:
            recv, send = ctx.Pipe(duplex=False)
            proc = ctx.Process(target=_child, args=(send, *jobs[i]), daemon=True)
            proc.start()
            send.close()
            live[recv] = (i, proc, time.perf_counter())
        while live:
            now = time.perf_counter()
            limits = [start + timeouts[i] - now for i, _, start in live.values() if timeouts[i] is not None]
            ready = wait(list(live), timeout=max(0.0, min(limits)) if limits else None)
            for conn in ready:
                i, proc, start = live.pop(conn)
                try:
                    msg = conn.recv()
                except EOFError:
                    msg = ("error", f"worker exited with code {proc.exitcode}", "")
                conn.close()
                proc.join()
                out[i] = (*msg, time.perf_counter() - start)
            now = time.perf_counter()
            for conn, (i, proc, start) in list(live.items()):
                if timeouts[i] is not None and now - start >= timeouts[i]:
                    proc.kill()
                    proc.join()
                    conn.close()
                    del live[conn]
                    out[i] = ("DNF", None, None, now - start)
    return out


def _row(method: str, outcome: tuple, records: Sequence[InjectionRecord]) -> MethodRow:
    status, payload, extra, elapsed = outcome
    if status == "DNF":
        return MethodRow(method, "DNF", elapsed, message="did not finish within the time limit")
    if status == "error":
        return MethodRow(method, "error", elapsed, message=payload)
    res, cfg = payload, extra
    metrics = evaluate_run(res, records)
    n_models = len(cfg["members"]) if method in NEURAL else None
    return MethodRow(
        method, "ok", res.runtime, metrics.injected_found, metrics.total_flagged,
        metrics.flagged_fraction, metrics.quality, float(res.threshold), list(metrics.found_ids),
        _public_config(cfg), n_models,
    )


def _public_config(cfg: Mapping[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in cfg.items() if k != "trace"}


def run_benchmark(
    ds: Dataset,
    methods: Sequence[str],
    *,
    master_seed: int | None = None,
    inject_seed: int | None = None,
    configs: Mapping[str, Mapping[str, Any]] | None = None,
    timeout: float | Mapping[str, float | None] | None = DEFAULT_TIMEOUT,
    parallel: bool = False,
    standardize: bool = True,
    holdout: Dataset | None = None,
    injection_spec: Sequence[Mapping] | None = None,
    dataset_name: str = "dataset",
) -> tuple[BenchmarkReport, Dataset]:
    """Inject four anomalies into ``ds``, run every method and evaluate it.

    Injection happens before standardization, so the scaler sees the
    anomalies.  ``holdout`` is transformed with the same scaler.  ``timeout``
    is seconds per method (a mapping gives per-method limits, ``None`` means
    no limit and in-process execution).  Returns the report and the scored
    (injected, possibly standardized) dataset.
    """
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise UnknownMethod(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    if len(set(methods)) != len(methods):
        raise ValueError("methods must be distinct")
    master = default_seed() if master_seed is None else int(master_seed)
    iseed = inject_seed_for(master) if inject_seed is None else int(inject_seed)
    injected, records = inject_anomalies(ds, iseed, injection_spec)
    data, hold = injected, holdout
    if standardize:
        scaler = fit_scaler(injected)
        data = scaler.transform(injected)
        hold = None if holdout is None else scaler.transform(holdout)
    configs = dict(configs or {})
    limits = [timeout.get(m, DEFAULT_TIMEOUT) if isinstance(timeout, Mapping) else timeout for m in methods]
    jobs = [(m, data, configs.get(m), method_seed(master, m), hold) for m in methods]
    outcomes: list[tuple | None] = [None] * len(jobs)
    isolated = [i for i, t in enumerate(limits) if t is not None or parallel]
    for i, job in enumerate(jobs):
        if i not in isolated:
            t0 = time.perf_counter()
            try:
                res, cfg = run_method(*job)
                outcomes[i] = ("ok", res, cfg, time.perf_counter() - t0)
            except Exception as exc:
                outcomes[i] = ("error", f"{type(exc).__name__}: {exc}", "", time.perf_counter() - t0)
    if isolated:
        done = _run_isolated([jobs[i] for i in isolated], [limits[i] for i in isolated], parallel)
        for i, o in zip(isolated, done):
            outcomes[i] = o
    rows = [_row(m, o, records) for m, o in zip(methods, outcomes)]
    report = BenchmarkReport(
        dataset_name, data.n, len(data.feature_names), master, iseed, __version__, rows,
        injected=[r.to_dict() for r in records],
        timeout={m: t for m, t in zip(methods, limits)},
        parallel=parallel, standardized=standardize, hardware=hardware_info(),
    )
    return report, data
