"""Command-line entry point: ``anomkit {preprocess,inject,detect,tune,benchmark,report}``.

Every command that takes a CSV also needs its column schema (``--schema``) or
a preset (``--preset``).  The master seed defaults to ``$ANOMKIT_SEED`` (else 0).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__, jsonio
from .benchmark import DEFAULT_TIMEOUT, default_seed, run_benchmark
from .dataio import (
    Dataset,
    inject_anomalies,
    load_csv,
    load_injection_spec,
    load_schema,
    schema_to_dict,
    write_csv,
)
from .detectors import METHODS, run_method
from .errors import AnomkitError
from .iforest import IForestConfig, default_iforest_grid, tune_iforest
from .pipeline import PrepConfig, BmiSpec, preprocess
from .presets import load_preset, preset_config, preset_schema
from .report import load_report
from .scoring import default_kappa_grid, tune_dbscan, tune_kmeans

TUNABLE = ("kmeans", "dbscan", "iforest")


def _json_arg(text: str | None) -> Any:
    """Inline JSON or a path to a JSON file."""
    if text is None:
        return None
    stripped = text.lstrip()
    if stripped.startswith(("{", "[")):
        return json.loads(text)
    with open(text, encoding="utf-8") as fh:
        return json.load(fh)


def _schema(args):
    if args.schema:
        return load_schema(args.schema)
    if getattr(args, "preset", None):
        return preset_schema(args.preset)
    raise AnomkitError("--schema (or --preset) is required")


def _load(args, path: str | None = None) -> Dataset:
    return load_csv(path or args.csv, _schema(args), generate_ids=getattr(args, "generate_ids", False))


def _seed(args) -> int:
    return default_seed() if args.seed is None else args.seed


# -- commands -----------------------------------------------------------------


def cmd_preprocess(args) -> int:
    raw = load_preset(args.preset)["preprocess"] if args.preset else {}
    cfg = PrepConfig.from_dict(raw)
    if args.bmi:
        weight, height = args.bmi.split(",")
        cfg = PrepConfig(BmiSpec(weight.strip(), height.strip(), args.height_unit, args.bmi_name),
                         cfg.one_hot, cfg.standardize)
    if args.no_one_hot:
        cfg = PrepConfig(cfg.bmi, False, cfg.standardize)
    if args.standardize:
        cfg = PrepConfig(cfg.bmi, cfg.one_hot, True)
    generate = args.generate_ids or bool(raw.get("generate_ids"))
    ds = load_csv(args.csv, _schema(args), generate_ids=generate)
    clean, report, _ = preprocess(ds, cfg)
    write_csv(clean, args.out)
    schema_out = Path(args.schema_out or Path(args.out).with_suffix(".schema.json"))
    jsonio.dump(schema_to_dict(clean.schema), schema_out)
    jsonio.dump(report, args.report or Path(args.out).with_suffix(".prep-report.json"))
    print(f"{report['rows_in']} -> {report['rows_out']} rows ({report['dropped_rows']} dropped), "
          f"{report['columns_in']} -> {report['columns_out']} columns; schema {schema_out}")
    return 0


def cmd_inject(args) -> int:
    ds = _load(args)
    spec = load_injection_spec(args.spec) if args.spec else None
    out, records = inject_anomalies(ds, _seed(args), spec)
    write_csv(out, args.out)
    jsonio.dump({"seed": _seed(args), "anomalies": [r.to_dict() for r in records]},
                args.records or Path(args.out).with_suffix(".injected.json"))
    print(f"{ds.n} -> {out.n} rows; injected ids: {', '.join(r.assigned_id for r in records)}")
    return 0


def _method_config(args, method: str) -> dict:
    cfg = preset_config(args.preset, method) if getattr(args, "preset", None) else {}
    cfg.update(_json_arg(args.config) or {})
    return cfg


def cmd_detect(args) -> int:
    ds = _load(args)
    holdout = _load(args, args.holdout) if args.holdout else None
    res, cfg = run_method(args.method, ds, _method_config(args, args.method), _seed(args), holdout)
    trace = cfg.pop("trace", None)
    doc = {
        "method": res.method,
        "config": {**cfg, "seed": _seed(args)},
        "threshold": res.threshold,
        "higher_is_anomalous": res.higher_is_anomalous,
        "rows": res.to_dict()["rows"],
        "runtime_seconds": res.runtime,
    }
    jsonio.dump(doc, args.out)
    if args.trace and trace is not None:
        jsonio.dump(trace, args.trace)
    print(f"{res.method}: {res.n_flagged} of {len(res.row_ids)} rows flagged in {res.runtime:.3f} s")
    return 0


def cmd_tune(args) -> int:
    ds = _load(args)
    X = ds.matrix()
    grid = _json_arg(args.grid)
    seed = _seed(args)
    if args.method == "kmeans":
        t = tune_kmeans(X, grid or list(range(2, 21)), seed=seed)
        best, trace = {"k": t.best_k, "seed": t.model.seed, "quality": t.silhouettes[t.best_k]}, t.trace
    elif args.method == "dbscan":
        t = tune_dbscan(X, grid or default_kappa_grid(X.shape[1]), seed=seed)
        best, trace = {"eps": t.eps, "kappa": t.kappa, "quality": t.silhouette}, t.trace
    else:
        configs = default_iforest_grid() if grid is None else [IForestConfig(**g) for g in grid]
        t = tune_iforest(X, configs, seed=seed)
        b = t.best
        best = {"n_est": b.n_est, "s_max": b.s_max, "f_max": b.f_max, "seed": b.seed,
                "quality": t.mean_scores[t.best_index]}
        trace = t.trace
    jsonio.dump({"method": args.method, "best": best, "trace": trace}, args.out)
    print(f"{args.method}: best {best}")
    return 0


def cmd_benchmark(args) -> int:
    ds = _load(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    configs = {m: _method_config(args, m) for m in methods}
    if args.config:
        per_method = _json_arg(args.config)
        configs = {m: {**(preset_config(args.preset, m) if args.preset else {}), **per_method.get(m, {})}
                   for m in methods}
    holdout = _load(args, args.holdout) if args.holdout else None
    spec = load_injection_spec(args.injection_spec) if args.injection_spec else None
    timeout = None if args.timeout <= 0 else args.timeout
    report, _ = run_benchmark(
        ds, methods, master_seed=_seed(args), inject_seed=args.inject_seed, configs=configs,
        timeout=timeout, parallel=args.parallel, standardize=not args.no_standardize,
        holdout=holdout, injection_spec=spec, dataset_name=args.name or Path(args.csv).stem,
    )
    paths = report.write(args.out)
    for r in report.rows:
        found = "DNF" if r.status == "DNF" else r.injected_found if r.status == "ok" else "error"
        print(f"{r.method:>13}: found {found}/4, flagged {r.total_flagged}, {r.runtime:.2f} s")
    print(f"report written to {paths['json'].parent}")
    return 0


def cmd_report(args) -> int:
    report = load_report(args.report_json)
    out = Path(args.out or Path(args.report_json).parent)
    paths = report.write(out)
    print(f"rendered {paths['md']} and {paths['svg']}")
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anomkit", description="Unsupervised anomaly detection on tabular data.")
    p.add_argument("--version", action="version", version=f"anomkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def data_args(sp, seed=True):
        sp.add_argument("csv", help="input CSV (UTF-8, header row)")
        sp.add_argument("--schema", help="column schema JSON")
        sp.add_argument("--preset", help="named preset (paper-ds1, paper-ds2)")
        sp.add_argument("--generate-ids", action="store_true", help="number rows 1..n instead of reading the id column")
        if seed:
            sp.add_argument("--seed", type=int, default=None, help="master seed (default $ANOMKIT_SEED or 0)")

    sp = sub.add_parser("preprocess", help="drop incomplete rows, derive BMI, one-hot encode, standardize")
    data_args(sp, seed=False)
    sp.add_argument("--out", required=True, help="clean CSV")
    sp.add_argument("--report", help="prep report JSON (default <out>.prep-report.json)")
    sp.add_argument("--schema-out", help="schema of the clean CSV (default <out>.schema.json)")
    sp.add_argument("--bmi", metavar="WEIGHT,HEIGHT", help="derive BMI from these two columns")
    sp.add_argument("--height-unit", choices=("auto", "m", "cm"), default="auto")
    sp.add_argument("--bmi-name", default="BMI")
    sp.add_argument("--no-one-hot", action="store_true")
    sp.add_argument("--standardize", action="store_true")
    sp.set_defaults(func=cmd_preprocess)

    sp = sub.add_parser("inject", help="append the four graded synthetic anomalies")
    data_args(sp)
    sp.add_argument("--spec", help="explicit injection spec JSON")
    sp.add_argument("--out", required=True)
    sp.add_argument("--records", help="injection records JSON (default <out>.injected.json)")
    sp.set_defaults(func=cmd_inject)

    sp = sub.add_parser("detect", help="run one detector and write per-row scores and flags")
    data_args(sp)
    sp.add_argument("--method", required=True, choices=METHODS)
    sp.add_argument("--config", help="method config: inline JSON or a file")
    sp.add_argument("--holdout", help="clean CSV for percentile thresholds (neural methods)")
    sp.add_argument("--out", required=True, help="result JSON")
    sp.add_argument("--trace", help="write the tuning trace here (tuned methods)")
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("tune", help="grid search for kmeans, dbscan or iforest")
    data_args(sp)
    sp.add_argument("--method", required=True, choices=TUNABLE)
    sp.add_argument("--grid", help="k list (kmeans), kappa list (dbscan) or config list (iforest); JSON or file")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_tune)

    sp = sub.add_parser("benchmark", help="inject, run several methods, write report.json/.md/.svg")
    data_args(sp)
    sp.add_argument("--methods", default=",".join(METHODS[:6]) + ",ae-ensemble",
                    help="comma-separated method list")
    sp.add_argument("--config", help="per-method configs {method: {...}}: inline JSON or a file")
    sp.add_argument("--inject-seed", type=int, default=None, help="default: derived from the master seed")
    sp.add_argument("--injection-spec", help="explicit injection spec JSON")
    sp.add_argument("--holdout", help="clean CSV from the same source, for percentile thresholds")
    sp.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT, help="seconds per method; 0 = no limit")
    sp.add_argument("--parallel", action="store_true", help="run methods concurrently (runtimes not comparable)")
    sp.add_argument("--no-standardize", action="store_true", help="score raw values")
    sp.add_argument("--name", help="dataset name in the report")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_benchmark)

    sp = sub.add_parser("report", help="re-render report.md and report.svg from report.json")
    sp.add_argument("report_json")
    sp.add_argument("--out", help="output directory (default: next to the JSON)")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (AnomkitError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"anomkit {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
