"""JSON output with every float written to 17 significant digits.

17 digits round-trip any float64 exactly, so equal values always serialize
to identical bytes.  Non-finite floats become ``null``.
"""
from __future__ import annotations

import json
import math
from typing import Any

import numpy as np


def _float(v: float) -> str:
    if not math.isfinite(v):
        return "null"
    s = f"{v:.17g}"
    if "e" not in s and "." not in s and s.lstrip("-").isdigit():
        s += ".0"
    return s


def _encode(obj: Any, indent: int | None, level: int) -> str:
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        items = [(str(k), v) for k, v in obj.items()]
        if not items:
            return "{}"
        parts = [f"{json.dumps(k, ensure_ascii=False)}: {_encode(v, indent, level + 1)}" for k, v in items]
        return _wrap("{", "}", parts, indent, level)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [_encode(v, indent, level + 1) for v in obj]
        return _wrap("[", "]", parts, indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _wrap(open_: str, close: str, parts: list[str], indent: int | None, level: int) -> str:
    if indent is None:
        return open_ + ", ".join(parts) + close
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    return open_ + "\n" + ",\n".join(pad + p for p in parts) + "\n" + end + close


def dumps(obj: Any, indent: int | None = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def dump(obj: Any, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))
