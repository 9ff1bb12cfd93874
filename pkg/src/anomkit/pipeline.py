"""The cleaning pipeline: drop incomplete rows, derive BMI, one-hot encode, optionally standardize."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .dataio import Dataset, ScalerParams, derive_bmi, drop_missing, one_hot_encode, one_hot_plan, standardize


@dataclass(frozen=True)
class BmiSpec:
    weight: str = "Weight"
    height: str = "Height"
    height_unit: str = "auto"
    name: str = "BMI"


@dataclass(frozen=True)
class PrepConfig:
    bmi: BmiSpec | None = None
    one_hot: bool = True
    standardize: bool = False

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "PrepConfig":
        bmi = raw.get("bmi")
        return cls(
            BmiSpec(**bmi) if bmi else None,
            bool(raw.get("one_hot", True)),
            bool(raw.get("standardize", False)),
        )


def preprocess(ds: Dataset, cfg: PrepConfig = PrepConfig()) -> tuple[Dataset, dict[str, Any], ScalerParams | None]:
    """Run the pipeline and return the clean table, a JSON-ready report and the scaler (if any).

    Rows are dropped before BMI is derived so a missing height never yields a
    missing BMI; column counts in the report include the identifier column.
    """
    rows_in, cols_in = ds.n, ds.d
    out, dropped = drop_missing(ds)
    added = []
    if cfg.bmi is not None:
        b = cfg.bmi
        out = derive_bmi(out, b.weight, b.height, b.height_unit, b.name)
        added.append(b.name)
    encoding: dict[str, list[str]] = {}
    if cfg.one_hot:
        plan = one_hot_plan(out)
        out = one_hot_encode(out)
        encoding = {col: [f"{col}={cat}" for cat in cats] for col, cats in plan.items()}
        added += [name for names in encoding.values() for name in names]
    scaler = None
    if cfg.standardize:
        out, scaler = standardize(out)
    report = {
        "rows_in": rows_in,
        "rows_out": out.n,
        "dropped_rows": dropped,
        "columns_in": cols_in,
        "columns_out": out.d,
        "added_columns": added,
        "encoding_map": encoding,
        "scaler": None if scaler is None else scaler.to_dict(),
    }
    return out, report, scaler
