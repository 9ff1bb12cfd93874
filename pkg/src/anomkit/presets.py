"""Named parameter sets shipped with the package (``paper-ds1``, ``paper-ds2``)."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .dataio import ColumnSchema, load_schema
from .errors import AnomkitError

DATA_DIR = Path(__file__).with_name("data")


def _all() -> dict[str, Any]:
    with open(DATA_DIR / "presets.json", encoding="utf-8") as fh:
        return json.load(fh)


def preset_names() -> list[str]:
    return sorted(_all())


def load_preset(name: str) -> dict[str, Any]:
    presets = _all()
    if name not in presets:
        raise AnomkitError(f"unknown preset {name!r}; choose from {', '.join(sorted(presets))}")
    return presets[name]


def preset_schema(name: str) -> tuple[ColumnSchema, ...]:
    return load_schema(DATA_DIR / load_preset(name)["schema"])


def preset_config(name: str, method: str) -> dict[str, Any]:
    return dict(load_preset(name)["methods"].get(method, {}))
