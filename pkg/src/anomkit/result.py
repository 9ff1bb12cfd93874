from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .dataio import ColumnKind, ColumnSchema, Dataset


@dataclass
class AnomalyResult:
    """Per-row scores and flags produced by one detector run.

    ``higher_is_anomalous`` records the score direction: distance and
    reconstruction scores grow with abnormality, isolation-forest and OCSVM
    scores shrink.
    """

    method: str
    row_ids: tuple[str, ...]
    scores: np.ndarray
    flags: np.ndarray
    threshold: float
    runtime: float = 0.0
    higher_is_anomalous: bool = True
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def n_flagged(self) -> int:
        return int(np.count_nonzero(self.flags))

    @property
    def flagged_ids(self) -> list[str]:
        return [i for i, f in zip(self.row_ids, self.flags) if f]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "threshold": float(self.threshold),
            "higher_is_anomalous": self.higher_is_anomalous,
            "rows": [
                {"id": i, "score": float(s), "flag": bool(f)}
                for i, s, f in zip(self.row_ids, self.scores, self.flags)
            ],
            "runtime_seconds": float(self.runtime),
        }


def as_matrix(data: Dataset | np.ndarray | Sequence) -> tuple[np.ndarray, tuple[str, ...]]:
    """Feature matrix and row ids of a Dataset or plain array (ids ``"0".."n-1"``)."""
    if isinstance(data, Dataset):
        return data.matrix(), data.row_ids
    X = np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return X, tuple(str(i) for i in range(X.shape[0]))


def as_dataset(data) -> Dataset:
    """Wrap a plain array as a Dataset with ids ``"0".."n-1"`` and features ``x0, x1, ...``."""
    if isinstance(data, Dataset):
        return data
    X, ids = as_matrix(data)
    schema = [ColumnSchema("id", ColumnKind.IDENTIFIER)]
    schema += [ColumnSchema(f"x{j}", ColumnKind.CONTINUOUS) for j in range(X.shape[1])]
    cols = {"id": list(ids), **{f"x{j}": X[:, j] for j in range(X.shape[1])}}
    return Dataset(schema, cols)
