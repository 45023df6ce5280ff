"""Coefficient files: JSON Lines, one header record then one record per mode.

Header::

    {"record": "header", "manifold": "circle", "nu": 2, "shift": 0,
     "j_max": 64, "basis_convention": "v1", "provenance": {...}}

Mode records, in level order and basis order within a level::

    {"j": 3, "lambda": 9, "k_index": 1, "label": [3], "re": ..., "im": ...,
     "log_offset": 0}

Floats are written with 17 significant digits so reading gives back the
same doubles.
"""

import json
import math

import numpy as np

from .spectrum import Manifold, ModelOperator, level_table
from .transform import SpectralVector

BASIS_CONVENTION = "v1"
_MODE_KEYS = ("j", "lambda", "k_index", "label", "re", "im", "log_offset")


class CoefficientFileError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _num(x):
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("non-finite value in coefficient data")
    if x == int(x) and abs(x) < 2**53:
        return str(int(x)) if not (x == 0 and math.copysign(1.0, x) < 0) else "-0.0"
    return f"{x:.17g}"


def _obj(pairs):
    return "{" + ", ".join(f'"{k}": {v}' for k, v in pairs) + "}"


def _canonical(value):
    """Deterministic JSON for provenance values (floats at 17 digits)."""
    if isinstance(value, dict):
        return _obj((k, _canonical(v)) for k, v in sorted(value.items()))
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_canonical(v) for v in value) + "]"
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _num(value)
    return json.dumps(str(value))


def dumps(v, provenance=None):
    op = v.operator
    lines = [
        _obj(
            [
                ("record", '"header"'),
                ("manifold", json.dumps(op.manifold.value)),
                ("nu", str(op.nu)),
                ("shift", _num(op.shift)),
                ("j_max", str(v.j_max)),
                ("basis_convention", json.dumps(BASIS_CONVENTION)),
                ("provenance", _canonical(provenance or {})),
            ]
        )
    ]
    tab = v.table
    lvl = tab.level_of_mode()
    starts = tab.offsets
    for i in range(tab.size):
        j = int(lvl[i])
        c = v.coeffs[i]
        label = "[" + ", ".join(str(int(x)) for x in tab.labels[i]) + "]"
        lines.append(
            _obj(
                [
                    ("j", str(j)),
                    ("lambda", _num(tab.lam[j])),
                    ("k_index", str(i - int(starts[j]))),
                    ("label", label),
                    ("re", _num(c.real)),
                    ("im", _num(c.imag)),
                    ("log_offset", _num(v.log_offset[j])),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def write_coefficients(path, v, provenance=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(v, provenance))


def _parse_header(rec, line):
    if not isinstance(rec, dict) or rec.get("record") != "header":
        raise CoefficientFileError("first record must be the header", line)
    for key in ("manifold", "nu", "shift", "j_max", "basis_convention"):
        if key not in rec:
            raise CoefficientFileError(f"header lacks '{key}'", line)
    try:
        manifold = Manifold(rec["manifold"])
    except ValueError:
        raise CoefficientFileError(f"unknown manifold {rec['manifold']!r}", line) from None
    if rec["basis_convention"] != BASIS_CONVENTION:
        raise CoefficientFileError(f"unsupported basis convention {rec['basis_convention']!r}", line)
    if rec["nu"] != 2:
        raise CoefficientFileError("only nu = 2 (the Laplacian) is supported", line)
    j_max = rec["j_max"]
    if not isinstance(j_max, int) or j_max < 0:
        raise CoefficientFileError("j_max must be a non-negative integer", line)
    shift = rec["shift"]
    if not isinstance(shift, (int, float)) or shift < 0:
        raise CoefficientFileError("shift must be a non-negative number", line)
    return ModelOperator(manifold, float(shift)), j_max, rec.get("provenance", {})


def loads(text):
    """Parse a coefficient file; returns ``(SpectralVector, provenance)``."""
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            records.append((lineno, json.loads(raw)))
        except json.JSONDecodeError as exc:
            raise CoefficientFileError(f"malformed JSON ({exc.msg})", lineno) from None
    if not records:
        raise CoefficientFileError("empty coefficient file")
    op, j_max, provenance = _parse_header(records[0][1], records[0][0])
    tab = level_table(op, j_max)
    body = records[1:]
    if len(body) != tab.size:
        where = body[-1][0] if body else records[0][0]
        raise CoefficientFileError(f"expected {tab.size} mode records for j_max = {j_max}, found {len(body)}", where)
    coeffs = np.empty(tab.size, dtype=np.complex128)
    offsets = np.zeros(j_max + 1)
    lvl = tab.level_of_mode()
    for i, (lineno, rec) in enumerate(body):
        if not isinstance(rec, dict) or any(k not in rec for k in _MODE_KEYS):
            raise CoefficientFileError(f"mode record needs keys {', '.join(_MODE_KEYS)}", lineno)
        j = int(lvl[i])
        if rec["j"] != j or rec["k_index"] != i - int(tab.offsets[j]):
            raise CoefficientFileError(f"record out of order: expected level {j}, index {i - int(tab.offsets[j])}", lineno)
        if list(rec["label"]) != [int(x) for x in tab.labels[i]]:
            raise CoefficientFileError(f"label {rec['label']} does not match basis order", lineno)
        if not math.isclose(float(rec["lambda"]), float(tab.lam[j]), rel_tol=1e-12, abs_tol=1e-12):
            raise CoefficientFileError(f"lambda {rec['lambda']} does not match level {j}", lineno)
        try:
            re_, im_, off = float(rec["re"]), float(rec["im"]), float(rec["log_offset"])
        except (TypeError, ValueError):
            raise CoefficientFileError("re, im and log_offset must be numbers", lineno) from None
        if not (math.isfinite(re_) and math.isfinite(im_) and math.isfinite(off)):
            raise CoefficientFileError("non-finite coefficient", lineno)
        if i > tab.offsets[j] and off != offsets[j]:
            raise CoefficientFileError("log_offset must be constant within a level", lineno)
        offsets[j] = off
        coeffs[i] = complex(re_, im_)
    return SpectralVector(op, coeffs, j_max, offsets), provenance


def read_coefficients(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CoefficientFileError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text)
