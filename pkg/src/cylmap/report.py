"""Report serialization: strict JSON with 17-digit floats, CSV polylines, pass/fail summary."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

FLOAT_DIGITS = 17


def _float(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    s = format(x, f".{FLOAT_DIGITS}g")
    # keep floats recognisable as floats when read back
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def plain(obj):
    """Convert numpy containers and scalars to built-in Python types."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float at 17 significant digits and keys in insertion order."""

    def enc(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if o is None or isinstance(o, (bool, str)):
            return json.dumps(o)
        if isinstance(o, int):
            return str(o)
        if isinstance(o, float):
            return _float(o)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in o):
                return "[" + ", ".join(enc(v, level) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in o) + "\n" + end + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(plain(obj), 0) + "\n"


def write_report(report: dict, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(report))
    except OSError as e:
        raise OSError(f"cannot write report to {path}: {e.strerror}") from e
    return path


def strip_timing(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timing"}


def export_polylines(report: dict, path) -> Path:
    """Write ``report["polylines"]`` as CSV rows ``polyline_id, kind, vertex, c0, c1, ...``.

    An empty list gives a header-only file.
    """
    path = Path(path)
    lines = plain(report.get("polylines", []))
    width = max((len(p["points"][0]) for p in lines if len(p["points"])), default=1)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["polyline_id", "kind", "vertex"] + [f"c{i}" for i in range(width)])
            for pid, line in enumerate(lines):
                for v, pt in enumerate(line["points"]):
                    w.writerow([pid, line["kind"], v] + [format(float(x), f".{FLOAT_DIGITS}g") for x in pt])
    except OSError as e:
        raise OSError(f"cannot write polylines to {path}: {e.strerror}") from e
    return path


def summary(report: dict) -> dict:
    """Machine-readable pass/fail view of a report."""
    return {
        "source": report["source"],
        "exit_code": report["exit_code"],
        "checks": report["checks"],
        "passed": all(c["passed"] for c in report["checks"].values()),
    }


def write_summary(report: dict, path) -> Path:
    return write_report(summary(report), path)
