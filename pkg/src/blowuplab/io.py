"""Artifact writers: CSV for grids and traces, JSON for reports.

Every file starts with a provenance line carrying the tool version and the
hash of the configuration that produced it.  Floats are written with %.17g so
identical runs give byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__


def config_hash(config) -> str:
    text = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def header_line(chash: str = "none") -> str:
    return f"# blowuplab {__version__} config={chash}"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path, columns, rows, chash: str = "none") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [header_line(chash), ",".join(columns)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_columns(path, columns: dict, chash: str = "none") -> Path:
    names = list(columns)
    rows = zip(*(np.asarray(columns[k]).tolist() for k in names))
    return write_csv(path, names, rows, chash)


def read_csv(path) -> dict:
    """Read a file written by write_csv back into float columns."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    names = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    data = data.reshape(-1, len(names))
    return {k: data[:, i] for i, k in enumerate(names)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_json(path, report, chash: str = "none") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"provenance": header_line(chash)[2:], **_jsonable(report)}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path
