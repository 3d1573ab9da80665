"""CSV/JSON result files.  Every CSV starts with ``# key=value`` lines that
record the config hash and seed."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import FileFormatError
from .problem import bitstring, from_bitstring

__all__ = ["FRONT_COLUMNS", "write_csv", "read_csv", "write_front", "read_front",
           "write_json"]

FRONT_COLUMNS = ["order", "bitstring", "nac", "f1", "f2", "f3", "f4", "f5", "f6",
                 "feasible", "outage_fraction"]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, rows, meta=None):
    """Write rows (sequences matching ``columns``) after the ``# k=v`` header."""
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_csv(path):
    """Return (meta dict, list of row dicts)."""
    meta, body = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k.strip()] = v.strip()
            else:
                body.append(line)
    rows = list(csv.DictReader(body))
    return meta, rows


def write_front(path, evaluations, meta=None, order=None):
    """``evaluations``: list of dicts with keys topology, f1..f6, feasible, outage_fraction."""
    rows = []
    for i, ev in enumerate(evaluations):
        x = np.asarray(ev["topology"], dtype=bool)
        rows.append([i if order is None else order[i], bitstring(x), int(x.sum()),
                     *[ev[f"f{k}"] for k in range(1, 7)], bool(ev["feasible"]),
                     float(ev["outage_fraction"])])
    write_csv(path, FRONT_COLUMNS, rows, meta)


def read_front(path, num_cells=None):
    """Topologies from a front CSV.  Errors name the offending row."""
    try:
        meta, rows = read_csv(path)
    except OSError as exc:
        raise FileFormatError(f"cannot read front file {path}: {exc}") from exc
    except csv.Error as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    if not rows:
        raise FileFormatError(f"{path}: front file has no rows")
    topologies = []
    for i, row in enumerate(rows, start=1):
        s = (row.get("bitstring") or "").strip()
        try:
            x = from_bitstring(s)
        except ValueError as exc:
            raise FileFormatError(f"{path}: row {i}: {exc}") from exc
        if num_cells is not None and x.size != num_cells:
            raise FileFormatError(f"{path}: row {i}: topology has {x.size} cells, "
                                  f"scenario has {num_cells}")
        if not x.any():
            raise FileFormatError(f"{path}: row {i}: all-off topology")
        topologies.append(x)
    return meta, topologies


def write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
