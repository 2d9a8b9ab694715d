"""JSON and CSV file formats.

Curve files: ``{"ambient": {...}, "nodes": [[x, y], ...]}``.
Field files: ``{"velocity": [[...], ...]}`` (``"field"`` and ``"nodes"`` are
accepted as keys).  Path files: ``{"ambient": ..., "times": [...],
"curves": [...], "velocities": [...], "diagnostics_csv": "..."}``.
CSV outputs start with a ``# config_hash=...`` line followed by the column
header.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .ambient import Euclidean, ambient_from_dict
from .errors import FileFormatError
from .geometry import Immersion
from .metric_spec import spec_from_dict

__all__ = [
    "load_json",
    "dump_json",
    "read_curve",
    "write_curve",
    "read_field",
    "read_metric",
    "write_path",
    "read_path",
    "write_csv",
    "config_hash",
]


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise FileFormatError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path} is not valid JSON: {exc}") from exc


def dump_json(obj, path):
    try:
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=1, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise FileFormatError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _numeric_rows(rows, what, path):
    if not isinstance(rows, list) or not rows:
        raise FileFormatError(f"{path}: '{what}' must be a non-empty list of points")
    width = None
    for j, row in enumerate(rows):
        if not isinstance(row, list):
            raise FileFormatError(f"{path}: {what}[{j}] is not a list")
        for c, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise FileFormatError(f"{path}: {what}[{j}][{c}] is not a finite number: {v!r}")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise FileFormatError(f"{path}: {what}[{j}] has {len(row)} entries, expected {width}")
    return np.array(rows, dtype=float)


def _ambient(d, width):
    if "ambient" in d:
        return ambient_from_dict(d["ambient"])
    return Euclidean(width)


def read_curve(path) -> Immersion:
    d = load_json(path)
    if not isinstance(d, dict) or "nodes" not in d:
        raise FileFormatError(f"{path}: curve file needs a 'nodes' entry")
    x = _numeric_rows(d["nodes"], "nodes", path)
    return Immersion(_ambient(d, x.shape[1]), x)


def write_curve(f: Immersion, path):
    dump_json({"ambient": f.ambient.to_dict(), "nodes": f.nodes.tolist()}, path)


def read_field(path, f: Immersion) -> np.ndarray:
    d = load_json(path)
    if isinstance(d, list):
        rows = d
    else:
        key = next((k for k in ("velocity", "field", "nodes") if k in d), None)
        if key is None:
            raise FileFormatError(f"{path}: field file needs a 'velocity' entry")
        rows = d[key]
    v = _numeric_rows(rows, "velocity", path)
    if v.shape != f.nodes.shape:
        raise FileFormatError(f"{path}: field has shape {v.shape}, curve has {f.nodes.shape}")
    return v


def read_metric(path):
    return spec_from_dict(load_json(path))


def write_path(path_obj, path, diagnostics_csv=None):
    d = {
        "ambient": path_obj.ambient.to_dict(),
        "times": [float(t) for t in path_obj.times],
        "curves": [c.nodes.tolist() for c in path_obj.curves],
        "velocities": [np.asarray(v).tolist() for v in path_obj.velocities],
    }
    if diagnostics_csv is not None:
        d["diagnostics_csv"] = str(diagnostics_csv)
    dump_json(d, path)


def read_path(path):
    from .geodesic import GeodesicPath

    d = load_json(path)
    if not isinstance(d, dict) or "times" not in d or "curves" not in d:
        raise FileFormatError(f"{path}: path file needs 'times' and 'curves'")
    times = d["times"]
    curves = []
    for k, rows in enumerate(d["curves"]):
        x = _numeric_rows(rows, f"curves[{k}]", path)
        curves.append(Immersion(_ambient(d, x.shape[1]), x))
    if "velocities" in d:
        vel = [_numeric_rows(v, f"velocities[{k}]", path) for k, v in enumerate(d["velocities"])]
    else:
        x = np.stack([c.nodes for c in curves])
        if len(times) < 3:
            raise FileFormatError(f"{path}: need velocities or at least 3 samples")
        vel = list(np.gradient(x, np.asarray(times, dtype=float), axis=0, edge_order=2))
    return GeodesicPath(times, curves, vel)


def config_hash(*parts) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, columns, rows, chash):
    """Write rows with a config-hash line and a header; ``path=None`` returns the text."""
    lines = [f"# config_hash={chash}"]

    class _Buf(list):
        def write(self, s):
            self.append(s)

    buf = _Buf()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    text = lines[0] + "\n" + "".join(buf)
    if path is None:
        return text
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise FileFormatError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return text
