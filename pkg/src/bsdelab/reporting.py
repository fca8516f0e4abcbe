"""JSON report writing with a determinism contract.

Reports are UTF-8, LF-terminated, two-space indented, insertion-ordered.
Wall-clock data lives only under the "sidecar" key, which comparisons strip:
identical inputs must produce byte-identical reports modulo that key.
"""

from __future__ import annotations

import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np


def sanitize(obj):
    """Make a payload JSON-safe and deterministic: numpy scalars to Python,
    arrays to lists, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_report(path, payload: dict, sidecar: bool = True) -> Path:
    path = Path(path)
    body = sanitize(payload)
    if sidecar:
        body = {**body, "sidecar": {"written_at": datetime.now(timezone.utc).isoformat()}}
    text = json.dumps(body, indent=2, ensure_ascii=False, allow_nan=False) + "\n"
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def load_report(path, strip_sidecar: bool = True) -> dict:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if strip_sidecar:
        data.pop("sidecar", None)
    return data


def reports_identical(path_a, path_b) -> bool:
    """Byte-identical comparison after removing the sidecar key."""
    a = json.dumps(load_report(path_a), indent=2, ensure_ascii=False)
    b = json.dumps(load_report(path_b), indent=2, ensure_ascii=False)
    return a == b


__all__ = ["sanitize", "write_report", "load_report", "reports_identical"]
