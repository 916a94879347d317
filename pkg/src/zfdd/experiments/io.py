"""CSV results with a JSON sidecar."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .. import __version__


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, columns: dict) -> Path:
    """Write equal-length columns with a header row, '.' decimals and '\\n' line ends."""
    path = Path(path)
    names = list(columns)
    cols = [np.asarray(columns[k]).tolist() if hasattr(columns[k], "__len__") else [columns[k]]
            for k in names]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("all CSV columns must have the same length")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([_cell(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_sidecar(path, params: dict, seed: int | None = None, **extra) -> Path:
    """JSON echo of every parameter, the seed and the package version."""
    path = Path(path)
    doc = {"version": __version__, "seed": seed, "params": _jsonable(params)}
    doc.update(_jsonable(extra))
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
