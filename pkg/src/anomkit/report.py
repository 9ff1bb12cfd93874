"""Benchmark report: JSON document, Markdown tables and an SVG bar chart.

The Markdown tables print every number with ``repr`` (shortest round-trip
form), so parsing them back yields exactly the floats stored in the JSON.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from html import escape
from pathlib import Path
from typing import Any

from . import jsonio

REPORT_FORMAT = "anomkit-report"
REPORT_VERSION = 1
SCHEMA_PATH = Path(__file__).with_name("data") / "report.schema.json"

LABELS = {
    "nn": "NN",
    "kmeans": "k-means",
    "dbscan": "DBSCAN",
    "hdbscan": "HDBSCAN",
    "ocsvm": "OCSVM",
    "iforest": "Isolation Forest",
    "ae": "Autoencoder",
    "vae": "Variational autoencoder",
    "ae-ensemble": "Autoencoder ensemble",
    "vae-ensemble": "Variational autoencoder ensemble",
}
QUALITY_KIND = {
    "kmeans": "silhouette",
    "dbscan": "silhouette",
    "hdbscan": "silhouette",
    "iforest": "mean anomaly score",
}


@dataclass
class MethodRow:
    """Outcome of one method; ``status`` is ``ok``, ``DNF`` (timed out) or ``error``."""

    method: str
    status: str
    runtime: float
    injected_found: int | None = None
    total_flagged: int | None = None
    flagged_fraction: float | None = None
    quality: float | None = None
    threshold: float | None = None
    found_ids: list[str] = field(default_factory=list)
    config: dict[str, Any] = field(default_factory=dict)
    n_models: int | None = None
    message: str | None = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "status": self.status,
            "injected_found": self.injected_found,
            "total_flagged": self.total_flagged,
            "flagged_fraction": self.flagged_fraction,
            "runtime_seconds": self.runtime,
            "quality": self.quality,
            "quality_kind": QUALITY_KIND.get(self.method) if self.quality is not None else None,
            "threshold": self.threshold,
            "found_ids": list(self.found_ids),
            "n_models": self.n_models,
            "config": self.config,
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MethodRow":
        return cls(
            d["method"], d["status"], d["runtime_seconds"], d.get("injected_found"),
            d.get("total_flagged"), d.get("flagged_fraction"), d.get("quality"), d.get("threshold"),
            list(d.get("found_ids") or []), dict(d.get("config") or {}), d.get("n_models"), d.get("message"),
        )


@dataclass
class BenchmarkReport:
    dataset: str
    n: int
    d: int
    master_seed: int
    inject_seed: int
    version: str
    rows: list[MethodRow]
    injected: list[dict] = field(default_factory=list)
    timeout: dict[str, float | None] = field(default_factory=dict)
    parallel: bool = False
    standardized: bool = True
    hardware: dict[str, Any] = field(default_factory=dict)

    @property
    def methods(self) -> list[str]:
        return [r.method for r in self.rows]

    def row(self, method: str) -> MethodRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "artifact_version": self.version,
            "dataset": self.dataset,
            "n": self.n,
            "d": self.d,
            "master_seed": self.master_seed,
            "inject_seed": self.inject_seed,
            "standardized": self.standardized,
            "parallel": self.parallel,
            "runtimes_comparable": not self.parallel,
            "timeout_seconds": self.timeout,
            "hardware": self.hardware,
            "injected": self.injected,
            "methods": [r.to_dict() for r in self.rows],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkReport":
        if d.get("format") != REPORT_FORMAT:
            raise ValueError("not an anomkit report")
        return cls(
            d["dataset"], d["n"], d["d"], d["master_seed"], d["inject_seed"], d["artifact_version"],
            [MethodRow.from_dict(r) for r in d["methods"]], list(d.get("injected") or []),
            dict(d.get("timeout_seconds") or {}), bool(d.get("parallel")), bool(d.get("standardized", True)),
            dict(d.get("hardware") or {}),
        )

    # -- rendering -----------------------------------------------------------

    def to_markdown(self) -> str:
        lines = [
            f"# Anomaly detection benchmark: {self.dataset}",
            "",
            f"{self.n} rows, {self.d} features, master seed {self.master_seed}, "
            f"injection seed {self.inject_seed}, anomkit {self.version}.",
        ]
        if self.parallel:
            lines.append("")
            lines.append("Methods ran concurrently, so runtimes are not comparable.")
        neural = [r for r in self.rows if r.n_models is not None]
        classical = [r for r in self.rows if r.n_models is None]
        if classical:
            lines += ["", "## Classical methods", "",
                      "| Method | Anomaly detected out of 4 | Total running time (s) | Quality score | Quality kind |",
                      "|---|---|---|---|---|"]
            for r in classical:
                kind = QUALITY_KIND.get(r.method, "-") if r.quality is not None else "-"
                lines.append(f"| {_label(r)} | {_cell(r, r.injected_found)} | {_time(r)} | "
                             f"{_cell(r, r.quality)} | {kind} |")
        if neural:
            lines += ["", "## Neural methods", "",
                      "| Method | Anomaly detected out of 4 | Total running time (s) | Total models |",
                      "|---|---|---|---|"]
            for r in neural:
                lines.append(f"| {_label(r)} | {_cell(r, r.injected_found)} | {_time(r)} | {r.n_models} |")
        lines += ["", "## Total detected anomalies", "",
                  "| Method | Total detected anomalies | Flagged fraction |", "|---|---|---|"]
        for r in self.rows:
            lines.append(f"| {_label(r)} | {_cell(r, r.total_flagged)} | {_cell(r, r.flagged_fraction)} |")
        if any(r.status == "DNF" for r in self.rows):
            lines += ["", "DNF: did not finish within the time limit."]
        return "\n".join(lines) + "\n"

    def to_svg(self, width: int = 720, height: int = 360) -> str:
        """Bars = flagged fraction (left axis); markers = injected anomalies found (right axis, 0-4)."""
        left, right, top, bottom = 56, 56, 24, 96
        pw, ph = width - left - right, height - top - bottom
        k = max(1, len(self.rows))
        slot = pw / k
        bw = slot * 0.6
        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
            f"<title>{escape(self.dataset)}: flagged fraction and injected anomalies found</title>",
            f'<line class="axis" x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="#333"/>',
            f'<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="#333"/>',
            f'<line class="axis" x1="{left + pw}" y1="{top}" x2="{left + pw}" y2="{top + ph}" stroke="#333"/>',
        ]
        for tick in range(5):
            y = top + ph - ph * tick / 4
            out.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{tick * 25}%</text>')
            out.append(f'<text x="{left + pw + 6}" y="{y + 4:.1f}">{tick}</text>')
        out.append(f'<text x="14" y="{top + ph / 2:.1f}" transform="rotate(-90 14 {top + ph / 2:.1f})" '
                   f'text-anchor="middle">flagged rows</text>')
        out.append(f'<text x="{width - 14}" y="{top + ph / 2:.1f}" transform="rotate(90 {width - 14} '
                   f'{top + ph / 2:.1f})" text-anchor="middle">injected found (of 4)</text>')
        points = []
        for i, r in enumerate(self.rows):
            cx = left + slot * (i + 0.5)
            frac = r.flagged_fraction if r.status == "ok" and r.flagged_fraction is not None else 0.0
            h = ph * frac
            out.append(f'<rect class="bar" data-method="{escape(r.method)}" x="{cx - bw / 2:.2f}" '
                       f'y="{top + ph - h:.2f}" width="{bw:.2f}" height="{h:.2f}" fill="#7fa7d1"/>')
            ty = top + ph + 14
            out.append(f'<text x="{cx:.2f}" y="{ty}" text-anchor="end" '
                       f'transform="rotate(-35 {cx:.2f} {ty})">{escape(_label(r))}</text>')
            if r.status != "ok":
                out.append(f'<text class="dnf" x="{cx:.2f}" y="{top + ph - 4}" text-anchor="middle">{r.status}</text>')
                continue
            my = top + ph - ph * (r.injected_found or 0) / 4
            points.append(f"{cx:.2f},{my:.2f}")
            out.append(f'<circle class="found" data-method="{escape(r.method)}" data-found="{r.injected_found}" '
                       f'cx="{cx:.2f}" cy="{my:.2f}" r="4" fill="#c0392b"/>')
        if len(points) > 1:
            out.append(f'<polyline class="found-line" points="{" ".join(points)}" fill="none" stroke="#c0392b"/>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {"json": out_dir / "report.json", "md": out_dir / "report.md", "svg": out_dir / "report.svg"}
        jsonio.dump(self.to_dict(), paths["json"])
        paths["md"].write_text(self.to_markdown(), encoding="utf-8")
        paths["svg"].write_text(self.to_svg(), encoding="utf-8")
        return paths


def load_report(path: str | Path) -> BenchmarkReport:
    with open(path, encoding="utf-8") as fh:
        return BenchmarkReport.from_dict(json.load(fh))


def report_schema() -> dict:
    with open(SCHEMA_PATH, encoding="utf-8") as fh:
        return json.load(fh)


def _label(r: MethodRow) -> str:
    return LABELS.get(r.method, r.method)


def _num(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def _cell(r: MethodRow, v) -> str:
    if r.status != "ok":
        return r.status
    return "-" if v is None else _num(v)


def _time(r: MethodRow) -> str:
    return f">{_num(r.runtime)}" if r.status == "DNF" else _num(r.runtime)
