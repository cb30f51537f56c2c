"""Flat-file formats: grid records (JSON), grid functions (CSV), reports (JSON/CSV)."""
from __future__ import annotations

import csv
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from .grid import Cylinder, GridFunction

__all__ = [
    "SCHEMA_VERSION",
    "read_grid",
    "read_grid_function",
    "to_jsonable",
    "write_grid",
    "write_grid_function",
    "write_json",
    "write_summary_csv",
]

SCHEMA_VERSION = "1.0"


def write_grid(grid: Cylinder, path) -> None:
    Path(path).write_text(json.dumps({"kind": "cylinder", **grid.to_record()}, indent=2) + "\n")


def read_grid(path) -> Cylinder:
    return Cylinder.from_record(json.loads(Path(path).read_text()))


def write_grid_function(u: GridFunction, path) -> None:
    """CSV with columns ``node, x1[, x2], t, value``; one row per node, flat C order."""
    g = u.grid
    xs = [np.broadcast_to(c, g.shape).ravel() for c in g.spatial_coords()]
    t = np.broadcast_to(g.time_coords(), g.shape).ravel()
    vals = u.filled().ravel()
    header = ["node"] + [f"x{i + 1}" for i in range(g.n)] + ["t", "value"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(vals.size):
            w.writerow([i] + [repr(float(x[i])) for x in xs] + [repr(float(t[i])), repr(float(vals[i]))])


def read_grid_function(path, grid: Cylinder | None = None) -> GridFunction:
    """Read the CSV written by :func:`write_grid_function`; the grid is inferred if not given."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[0] != "node" or header[-2:] != ["t", "value"]:
        raise ValueError(f"{path}: not a grid-function CSV (header {header})")
    n = len(header) - 3
    data = np.array([[float(v) for v in r] for r in body])
    if grid is None:
        x = np.unique(data[:, 1])
        t = np.unique(data[:, 1 + n])
        grid = Cylinder(n, float(x.max()), float(t.max()), len(x), len(t))
    if data.shape[0] != int(np.prod(grid.shape)):
        raise ValueError(f"{path}: {data.shape[0]} rows, grid has {int(np.prod(grid.shape))} nodes")
    vals = np.empty(int(np.prod(grid.shape)))
    vals[data[:, 0].astype(int)] = data[:, -1]
    return GridFunction(grid, vals.reshape(grid.shape))


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    return obj


def write_json(obj, path) -> None:
    doc = {"schema_version": SCHEMA_VERSION, **to_jsonable(obj)}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_summary_csv(rows: list[dict], path) -> None:
    keys = sorted({k for r in rows for k in r})
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: to_jsonable(r.get(k, "")) for k in keys})
