"""Tabular dataset loading, cleaning, encoding, scaling and anomaly injection.

A :class:`Dataset` is an immutable, column-typed table.  Continuous columns are
``float64`` arrays with ``nan`` for missing cells; categorical columns are object
arrays of ``str`` with ``None`` for missing cells; the single identifier column
provides the row ids.
"""
from __future__ import annotations

import csv
import enum
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    ConstantColumnWarning,
    DuplicateId,
    EmptyResult,
    MissingColumn,
    NonPositiveHeight,
    SchemaMismatch,
)


class ColumnKind(str, enum.Enum):
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"
    IDENTIFIER = "identifier"


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: ColumnKind
    unit: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ColumnKind(self.kind))

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind.value, "unit": self.unit}


def validate_schema(schema: Sequence[ColumnSchema]) -> tuple[ColumnSchema, ...]:
    schema = tuple(schema)
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        raise SchemaMismatch(f"duplicate column names in schema: {names}")
    n_id = sum(c.kind is ColumnKind.IDENTIFIER for c in schema)
    if n_id != 1:
        raise SchemaMismatch(f"schema needs exactly one identifier column, found {n_id}")
    return schema


def load_schema(path: str | Path) -> tuple[ColumnSchema, ...]:
    """Read a ``{"columns": [{"name", "kind", "unit"}]}`` schema file."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return schema_from_dict(raw)


def schema_from_dict(raw: Mapping) -> tuple[ColumnSchema, ...]:
    cols = [ColumnSchema(c["name"], c["kind"], c.get("unit")) for c in raw["columns"]]
    return validate_schema(cols)


def schema_to_dict(schema: Iterable[ColumnSchema]) -> dict:
    return {"columns": [c.to_dict() for c in schema]}


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


class Dataset:
    """Immutable column-typed table with stable row identifiers."""

    __slots__ = ("schema", "_columns")

    def __init__(self, schema: Sequence[ColumnSchema], columns: Mapping[str, Any]):
        schema = validate_schema(schema)
        cols: dict[str, np.ndarray] = {}
        n = None
        for c in schema:
            if c.name not in columns:
                raise MissingColumn(c.name)
            if c.kind is ColumnKind.CONTINUOUS:
                arr = np.asarray(columns[c.name], dtype=np.float64)
                arr = np.where(np.isfinite(arr), arr, np.nan)
            else:
                arr = np.empty(len(columns[c.name]), dtype=object)
                arr[:] = [None if v is None else str(v) for v in columns[c.name]]
            if arr.ndim != 1:
                raise SchemaMismatch(f"column {c.name!r} is not one-dimensional")
            if n is None:
                n = len(arr)
            elif len(arr) != n:
                raise SchemaMismatch(f"column {c.name!r} has {len(arr)} cells, expected {n}")
            cols[c.name] = _freeze(arr)
        ids = cols[self._id_name(schema)]
        if any(v is None for v in ids):
            raise SchemaMismatch("identifier column contains missing values")
        if len(set(ids)) != len(ids):
            seen, dup = set(), None
            for v in ids:
                if v in seen:
                    dup = v
                    break
                seen.add(v)
            raise DuplicateId(f"identifier {dup!r} repeats")
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "_columns", cols)

    def __setattr__(self, key, value):
        raise AttributeError("Dataset is immutable")

    def __reduce__(self):
        return Dataset, (self.schema, dict(self._columns))

    @staticmethod
    def _id_name(schema) -> str:
        return next(c.name for c in schema if c.kind is ColumnKind.IDENTIFIER)

    @property
    def id_column(self) -> str:
        return self._id_name(self.schema)

    @property
    def row_ids(self) -> tuple[str, ...]:
        return tuple(self._columns[self.id_column])

    @property
    def n(self) -> int:
        return len(self._columns[self.id_column])

    @property
    def d(self) -> int:
        """Column count, identifier included."""
        return len(self.schema)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.schema]

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.schema if c.kind is not ColumnKind.IDENTIFIER]

    def column(self, name: str) -> np.ndarray:
        return self._columns[name]

    def kind(self, name: str) -> ColumnKind:
        for c in self.schema:
            if c.name == name:
                return c.kind
        raise MissingColumn(name)

    def matrix(self, columns: Sequence[str] | None = None) -> np.ndarray:
        """Return the selected (default: all non-identifier) columns as an n x f float array."""
        columns = self.feature_names if columns is None else list(columns)
        for name in columns:
            if self.kind(name) is not ColumnKind.CONTINUOUS:
                raise SchemaMismatch(f"column {name!r} is not continuous; encode it first")
        if not columns:
            return np.empty((self.n, 0))
        return np.column_stack([self._columns[c] for c in columns])

    def missing_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        for c in self.schema:
            col = self._columns[c.name]
            if c.kind is ColumnKind.CONTINUOUS:
                mask |= np.isnan(col)
            else:
                mask |= np.array([v is None for v in col], dtype=bool)
        return mask

    def take(self, index) -> "Dataset":
        return Dataset(self.schema, {k: v[index] for k, v in self._columns.items()})

    def to_dict(self) -> dict[str, np.ndarray]:
        return dict(self._columns)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, Dataset) or self.schema != other.schema:
            return NotImplemented if not isinstance(other, Dataset) else False
        for c in self.schema:
            a, b = self._columns[c.name], other._columns[c.name]
            if c.kind is ColumnKind.CONTINUOUS:
                if not np.array_equal(a, b, equal_nan=True):
                    return False
            elif list(a) != list(b):
                return False
        return True

    __hash__ = None

    def __repr__(self):
        return f"Dataset(n={self.n}, d={self.d}, columns={self.names})"


def load_csv(path: str | Path, schema: Sequence[ColumnSchema], generate_ids: bool = False) -> Dataset:
    """Parse a headed CSV; columns are matched by name in any order.

    With ``generate_ids`` the identifier column is not read from the file but
    numbered ``1..n`` in file order (for tables shipped without an id column).
    """
    schema = validate_schema(schema)
    id_name = Dataset._id_name(schema)
    read = [c for c in schema if not (generate_ids and c.name == id_name)]
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn("empty file: no header row") from None
        header = [h.strip() for h in header]
        if header and header[0].startswith("﻿"):
            header[0] = header[0][1:]
        pos = {}
        for c in read:
            if c.name not in header:
                raise MissingColumn(c.name)
            pos[c.name] = header.index(c.name)
        raw = {c.name: [] for c in read}
        n = 0
        for line in reader:
            if not line:
                continue
            n += 1
            for c in read:
                j = pos[c.name]
                raw[c.name].append(line[j].strip() if j < len(line) else "")
    if generate_ids:
        raw[id_name] = [str(i + 1) for i in range(n)]
    cols: dict[str, Any] = {}
    for c in schema:
        if c.kind is ColumnKind.CONTINUOUS:
            cols[c.name] = np.array([_parse_float(v) for v in raw[c.name]], dtype=np.float64)
        else:
            cols[c.name] = [v if v != "" else None for v in raw[c.name]]
    return Dataset(schema, cols)


def _parse_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        return math.nan
    return v if math.isfinite(v) else math.nan


def write_csv(ds: Dataset, path: str | Path) -> None:
    """Serialize so that :func:`load_csv` with ``ds.schema`` reproduces ``ds`` exactly."""
    cols = [ds.column(c.name) for c in ds.schema]
    kinds = [c.kind for c in ds.schema]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ds.names)
        for i in range(ds.n):
            row = []
            for col, kind in zip(cols, kinds):
                v = col[i]
                if kind is ColumnKind.CONTINUOUS:
                    row.append("" if np.isnan(v) else repr(float(v)))
                else:
                    row.append("" if v is None else v)
            w.writerow(row)


def drop_missing(ds: Dataset) -> tuple[Dataset, int]:
    mask = ds.missing_mask()
    dropped = int(mask.sum())
    if dropped == ds.n and ds.n > 0:
        raise EmptyResult("every row has at least one missing cell")
    if dropped == 0:
        return ds, 0
    return ds.take(np.flatnonzero(~mask)), dropped


def derive_bmi(
    ds: Dataset,
    weight_col: str = "Weight",
    height_col: str = "Height",
    height_unit: str = "auto",
    name: str = "BMI",
) -> Dataset:
    """Append ``BMI = weight / height**2`` (height in metres).

    ``height_unit='auto'`` reads any height above 3 as centimetres; ``'m'`` and
    ``'cm'`` force the unit for the whole column.
    """
    for col in (weight_col, height_col):
        if ds.kind(col) is not ColumnKind.CONTINUOUS:
            raise SchemaMismatch(f"column {col!r} must be continuous")
    if name in ds.names:
        raise SchemaMismatch(f"column {name!r} already exists")
    h = ds.column(height_col).astype(float)
    w = ds.column(weight_col).astype(float)
    if np.any(h[~np.isnan(h)] <= 0):
        raise NonPositiveHeight(f"{height_col} has non-positive values")
    if height_unit == "auto":
        h = np.where(h > 3, h / 100.0, h)
    elif height_unit == "cm":
        h = h / 100.0
    elif height_unit != "m":
        raise ValueError(f"height_unit must be 'auto', 'm' or 'cm', got {height_unit!r}")
    bmi = w / (h * h)
    schema = list(ds.schema) + [ColumnSchema(name, ColumnKind.CONTINUOUS, "kg/m2")]
    cols = ds.to_dict()
    cols[name] = bmi
    return Dataset(schema, cols)


def one_hot_plan(ds: Dataset) -> dict[str, list[str]]:
    """Categories per categorical column, in first-appearance order."""
    plan = {}
    for c in ds.schema:
        if c.kind is ColumnKind.CATEGORICAL:
            seen: dict[str, None] = {}
            for v in ds.column(c.name):
                if v is not None:
                    seen.setdefault(v, None)
            plan[c.name] = list(seen)
    return plan


def one_hot_encode(ds: Dataset) -> Dataset:
    """Replace each categorical column in place by ``<col>=<category>`` 0/1 columns.

    A missing categorical cell encodes as an all-zero block.
    """
    plan = one_hot_plan(ds)
    if not plan:
        return ds
    schema, cols = [], {}
    for c in ds.schema:
        if c.kind is not ColumnKind.CATEGORICAL:
            schema.append(c)
            cols[c.name] = ds.column(c.name)
            continue
        cats = plan[c.name]
        if len(cats) == 1:
            warnings.warn(
                f"categorical column {c.name!r} has a single category; its encoding is constant",
                ConstantColumnWarning,
                stacklevel=2,
            )
        values = ds.column(c.name)
        for cat in cats:
            new = f"{c.name}={cat}"
            if new in cols or new in ds.names:
                raise SchemaMismatch(f"encoded column name {new!r} collides with an existing column")
            schema.append(ColumnSchema(new, ColumnKind.CONTINUOUS))
            cols[new] = np.fromiter((v == cat for v in values), dtype=np.float64, count=ds.n)
    return Dataset(schema, cols)


@dataclass(frozen=True)
class ScalerParams:
    columns: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    zero_variance: tuple[str, ...] = ()

    def transform(self, ds: Dataset) -> Dataset:
        cols = ds.to_dict()
        zero = set(self.zero_variance)
        for name, mu, sd in zip(self.columns, self.mean, self.std):
            if name not in zero:
                cols[name] = (cols[name] - mu) / sd
        return Dataset(ds.schema, cols)

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "zero_variance": list(self.zero_variance),
        }


def fit_scaler(ds: Dataset) -> ScalerParams:
    names = ds.feature_names
    X = ds.matrix(names)
    mean = np.nanmean(X, axis=0) if ds.n else np.zeros(len(names))
    std = np.nanstd(X, axis=0) if ds.n else np.zeros(len(names))
    # float noise on constant columns must not be divided out
    zero = tuple(nm for nm, mu, sd in zip(names, mean, std) if sd <= 1e-12 * max(1.0, abs(mu)))
    return ScalerParams(tuple(names), _freeze(mean), _freeze(std), zero)


def standardize(ds: Dataset) -> tuple[Dataset, ScalerParams]:
    """Z-score every non-identifier column with population moments."""
    params = fit_scaler(ds)
    return params.transform(ds), params


class AnomalyGrade(str, enum.Enum):
    EXTREME_MARGINAL = "extreme-marginal"
    MODERATE_MARGINAL = "moderate-marginal"
    BROKEN_CORRELATION = "broken-correlation"
    SUBTLE_COMBINATION = "subtle-combination"

    @classmethod
    def parse(cls, value) -> "AnomalyGrade":
        if isinstance(value, int) and not isinstance(value, bool):
            return list(cls)[value - 1]
        return cls(value)


@dataclass(frozen=True)
class InjectionRecord:
    grade: AnomalyGrade
    payload: dict = field(hash=False)
    assigned_id: str = ""

    def to_dict(self) -> dict:
        return {"grade": self.grade.value, "id": self.assigned_id, "values": dict(self.payload)}


EXTREME_SIGMAS = 10.0
MODERATE_SIGMAS = 4.0
SUBTLE_SIGMAS = 1.5
# broken-correlation rows are drawn from this tail fraction of each feature
SWAP_TAIL = 0.02


def load_injection_spec(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)["anomalies"]


def _fresh_ids(existing: Sequence[str], count: int) -> list[str]:
    taken = set(existing)
    out, i = [], 1
    while len(out) < count:
        cand = f"injected-{i}"
        if cand not in taken:
            out.append(cand)
        i += 1
    return out


def inject_anomalies(
    ds: Dataset, seed: int, spec: Sequence[Mapping] | None = None
) -> tuple[Dataset, list[InjectionRecord]]:
    """Append four graded synthetic anomalies.

    Without ``spec`` the rows are generated from ``seed``:

    1. one continuous feature set to ``mean + 10 sd``;
    2. another feature set to ``mean + 4 sd``;
    3. the most correlated feature pair decoupled: one feature taken from the
       upper tail of one row, its partner from the opposite tail of another;
    4. every continuous feature shifted by ``+1.5 sd``.

    Unchanged cells (including categorical ones) come from a random base row.
    With ``spec`` (four ``{"grade", "values"}`` mappings) the rows are used as given.
    """
    id_col = ds.id_column
    if spec is not None:
        records = _records_from_spec(ds, spec)
    else:
        records = _generate_records(ds, seed)
    ids = _fresh_ids(ds.row_ids, len(records))
    records = [InjectionRecord(r.grade, r.payload, i) for r, i in zip(records, ids)]
    cols = {}
    for c in ds.schema:
        base = list(ds.column(c.name))
        if c.name == id_col:
            extra = ids
        else:
            extra = [r.payload[c.name] for r in records]
        if c.kind is ColumnKind.CONTINUOUS:
            cols[c.name] = np.concatenate([ds.column(c.name), np.asarray(extra, dtype=float)])
        else:
            cols[c.name] = base + [None if v is None else str(v) for v in extra]
    return Dataset(ds.schema, cols), records


def _records_from_spec(ds: Dataset, spec: Sequence[Mapping]) -> list[InjectionRecord]:
    spec = list(spec)
    if len(spec) != 4:
        raise SchemaMismatch(f"injection spec needs exactly 4 anomalies, got {len(spec)}")
    features = ds.feature_names
    out = []
    for item in spec:
        values = dict(item["values"])
        values.pop(ds.id_column, None)
        if set(values) != set(features):
            missing = sorted(set(features) - set(values))
            extra = sorted(set(values) - set(features))
            raise SchemaMismatch(f"anomaly row arity mismatch (missing {missing}, unexpected {extra})")
        payload = {}
        for name in features:
            v = values[name]
            payload[name] = float(v) if ds.kind(name) is ColumnKind.CONTINUOUS else v
        out.append(InjectionRecord(AnomalyGrade.parse(item["grade"]), payload))
    return out


def _generate_records(ds: Dataset, seed: int) -> list[InjectionRecord]:
    rng = np.random.default_rng(seed)
    cont = [c.name for c in ds.schema if c.kind is ColumnKind.CONTINUOUS]
    if ds.n < 2:
        raise SchemaMismatch("need at least two rows to generate anomalies")
    X = ds.matrix(cont)
    mean = np.nanmean(X, axis=0)
    std = np.nanstd(X, axis=0)
    usable = [j for j in range(len(cont)) if std[j] > 0]
    if len(usable) < 2:
        raise SchemaMismatch("need at least two non-constant continuous columns to generate anomalies")

    def base_row() -> dict:
        i = int(rng.integers(ds.n))
        return {name: ds.column(name)[i] for name in ds.feature_names}

    records = []
    j1, j2 = rng.choice(usable, size=2, replace=False)
    for j, k, grade in (
        (j1, EXTREME_SIGMAS, AnomalyGrade.EXTREME_MARGINAL),
        (j2, MODERATE_SIGMAS, AnomalyGrade.MODERATE_MARGINAL),
    ):
        row = base_row()
        row[cont[j]] = float(mean[j] + k * std[j])
        records.append(InjectionRecord(grade, row))

    # broken correlation
    Z = (X[:, usable] - mean[usable]) / std[usable]
    Z = np.where(np.isnan(Z), 0.0, Z)
    corr = (Z.T @ Z) / ds.n
    np.fill_diagonal(corr, 0.0)
    a, b = np.unravel_index(int(np.argmax(np.abs(corr))), corr.shape)
    fb = usable[b]
    sign = 1.0 if corr[a, b] >= 0 else -1.0
    tail = max(1, int(math.ceil(SWAP_TAIL * ds.n)))
    order_a = np.argsort(Z[:, a], kind="stable")
    order_b = np.argsort(sign * Z[:, b], kind="stable")
    hi_a = order_a[-tail:]  # top tail of feature a
    lo_b = order_b[:tail]  # tail of b at the opposite end of its correlation with a
    ra = int(rng.choice(hi_a))
    rb = int(rng.choice(lo_b))
    row = {name: ds.column(name)[ra] for name in ds.feature_names}
    row[cont[fb]] = float(X[rb, fb])
    records.append(InjectionRecord(AnomalyGrade.BROKEN_CORRELATION, row))

    row = base_row()
    for j in range(len(cont)):
        row[cont[j]] = float(row[cont[j]] + SUBTLE_SIGMAS * std[j])
    records.append(InjectionRecord(AnomalyGrade.SUBTLE_COMBINATION, row))

    for r in records:
        for name, v in r.payload.items():
            if isinstance(v, (np.floating, float)):
                r.payload[name] = float(v)
    return records
