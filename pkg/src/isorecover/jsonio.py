"""JSON emission with 17 significant digits for every float."""

from __future__ import annotations

import json
import math

import numpy as np


def fmt_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite value {x!r}")
    s = format(x, ".17g")
    # keep floats visibly floats so readers never have to guess
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def dumps(obj, indent: int | None = None, _level: int = 0) -> str:
    """Serialise ``obj`` like :func:`json.dumps`, but with fixed 17-digit floats."""
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)

    if isinstance(obj, dict):
        items = [(json.dumps(str(k)), v) for k, v in obj.items()]
        opener, closer = "{", "}"
    elif isinstance(obj, (list, tuple)):
        items = [(None, v) for v in obj]
        opener, closer = "[", "]"
    else:
        raise TypeError(f"object of type {type(obj).__name__} is not serialisable")

    parts = []
    for key, value in items:
        body = dumps(value, indent, _level + 1)
        parts.append(body if key is None else f"{key}: {body}")
    if not parts:
        return opener + closer
    # numeric vectors stay on one line even when indenting
    flat = all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for _, v in items)
    if indent is None or flat:
        return opener + ", ".join(parts) + closer
    pad = " " * (indent * (_level + 1))
    return opener + "\n" + ",\n".join(pad + p for p in parts) + "\n" + " " * (indent * _level) + closer
