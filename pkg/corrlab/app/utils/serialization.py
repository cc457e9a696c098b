"""Matrix <-> JSON codec and canonical report dumping"""

import json
import math
from typing import Any

import numpy as np

from .errors import ScenarioError


def _entry(value: Any) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ScenarioError(f"complex entries are [re, im] pairs, got {value!r}")
        re, im = value
        return complex(float(re), float(im))
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"matrix entry must be a number or an [re, im] pair, got {value!r}")
    return complex(float(value), 0.0)


def decode_matrix(obj: Any) -> np.ndarray:
    """Nested rows of entries; entries are numbers or [re, im] pairs."""
    if not isinstance(obj, list) or not obj:
        raise ScenarioError("a matrix is a non-empty list of rows")
    if not all(isinstance(row, list) for row in obj):
        raise ScenarioError("every matrix row must be a list")
    width = len(obj[0])
    if width == 0 or any(len(row) != width for row in obj):
        raise ScenarioError("matrix rows must be non-empty and of equal length")
    return np.array([[_entry(v) for v in row] for row in obj], dtype=complex)


def decode_vector(obj: Any) -> np.ndarray:
    """A flat list of entries, returned as a column."""
    if not isinstance(obj, list) or not obj:
        raise ScenarioError("a vector is a non-empty list of entries")
    return np.array([_entry(v) for v in obj], dtype=complex).reshape(-1, 1)


def encode_matrix(matrix: np.ndarray) -> list:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
    return [[[clean_float(z.real), clean_float(z.imag)] for z in row] for row in matrix]


def clean_float(value: float, digits: int = 6) -> float:
    """Round to a fixed number of significant digits; -0.0 becomes 0.0."""
    value = float(value)
    if not math.isfinite(value):
        return value
    if value == 0.0:
        return 0.0
    rounded = float(f"{value:.{digits - 1}e}")
    return rounded + 0.0


def to_jsonable(obj: Any) -> Any:
    """Convert numpy scalars, arrays and tuples inside a report to plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return encode_matrix(obj)
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return clean_float(obj)
    if isinstance(obj, complex):
        return [clean_float(obj.real), clean_float(obj.imag)]
    return obj


def dump_report(payload: Any) -> str:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2) + "\n"


def render_text(payload: Any, indent: int = 0) -> str:
    """Indented key: value rendering of a JSON report."""
    data = to_jsonable(payload)
    lines = []
    pad = "  " * indent
    if isinstance(data, dict):
        for key in sorted(data):
            value = data[key]
            if isinstance(value, dict) or (isinstance(value, list) and value and isinstance(value[0], dict)):
                lines.append(f"{pad}{key}:")
                lines.append(render_text(value, indent + 1))
            else:
                lines.append(f"{pad}{key}: {json.dumps(value)}")
    elif isinstance(data, list):
        for i, item in enumerate(data):
            lines.append(f"{pad}- [{i}]")
            lines.append(render_text(item, indent + 1))
    else:
        lines.append(f"{pad}{json.dumps(data)}")
    return "\n".join(line for line in lines if line)
