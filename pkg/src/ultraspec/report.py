"""Deterministic rendering of structured reports.

Floats are rounded to 12 significant digits before serialization, so last-bit
differences in intermediate arithmetic cannot change a report; non-finite
values become ``null``.
"""

import json
import math

import numpy as np

DIGITS = 12


def canonical(obj):
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{DIGITS}g}")
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj):
    return json.dumps(canonical(obj), indent=2, sort_keys=True, ensure_ascii=True) + "\n"


def fmt(x, digits=6):
    if x is None:
        return "n/a"
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{digits}g}"
