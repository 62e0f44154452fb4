"""Canonical JSON rendering: sorted keys, fixed float formatting.

Every JSON document the package writes (tree exports, explanation records,
metric reports) goes through :func:`canonical_dumps` so identical inputs
serialize byte-identically.
"""

from __future__ import annotations

import json
import math
from typing import Any

FLOAT_FORMAT = "%.12g"


def _render(value: Any, out: list[str]) -> None:
    if value is None or value is True or value is False:
        out.append(json.dumps(value))
    elif isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, bool):  # pragma: no cover - caught above
        out.append(json.dumps(value))
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite float not representable in JSON: {value}")
        text = FLOAT_FORMAT % value
        # keep integral floats distinguishable from ints
        if "." not in text and "e" not in text and "E" not in text:
            text += ".0"
        out.append(text)
    elif isinstance(value, dict):
        out.append("{")
        first = True
        for key in sorted(value):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {key!r}")
            if not first:
                out.append(",")
            first = False
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(":")
            _render(value[key], out)
        out.append("}")
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _render(item, out)
        out.append("]")
    else:
        raise TypeError(f"not JSON-serializable: {type(value).__name__}")


def canonical_dumps(value: Any) -> str:
    out: list[str] = []
    _render(value, out)
    return "".join(out)


def canonical_dump_path(value: Any, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_dumps(value))
        fh.write("\n")
