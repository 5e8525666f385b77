"""Canonical JSON rendering: sorted keys, floats with 17 significant digits."""

import json
import math

import numpy as np


def _float(x):
    if not math.isfinite(x):
        raise ValueError(f"non-finite float {x!r} cannot be rendered as JSON")
    text = format(x, ".17g")
    if text == "-0":
        text = "0"
    return text


def dumps(obj, indent=None):
    """Render ``obj`` deterministically.

    Identical inputs produce byte-identical output: dict keys are sorted and
    floats always use 17 significant digits.
    """
    return _render(obj, indent, 0)


def _render(obj, indent, level):
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        parts = [json.dumps(k, ensure_ascii=False) + ": " + _render(v, indent, level + 1)
                 for k, v in items]
        return _join("{", "}", parts, indent, level)
    if isinstance(obj, (list, tuple)):
        parts = [_render(v, indent, level + 1) for v in obj]
        return _join("[", "]", parts, indent, level)
    raise TypeError(f"cannot render {type(obj).__name__} as JSON")


def _join(open_, close, parts, indent, level):
    if not parts:
        return open_ + close
    if indent is None:
        return open_ + ", ".join(parts) + close
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    return open_ + "\n" + ",\n".join(pad + p for p in parts) + "\n" + end + close
