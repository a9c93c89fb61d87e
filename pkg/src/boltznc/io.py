"""Velocity CSV and JSON persistence with exact round trips.

Floats are written through repr, whose shortest-round-trip guarantee makes
save/load the identity on float64 and keeps output bytes deterministic.
Files land via a same-directory temporary plus os.replace, so a crashed
run never leaves a half-written artifact behind.
"""

import csv
import json
import os
from array import array

import numpy as np

from .stats import EmpiricalMeasure


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _atomic_text(path, text):
    path = os.fspath(path)
    parent = os.path.dirname(path) or "."
    os.makedirs(parent, exist_ok=True)
    tmp = os.path.join(parent, f".{os.path.basename(path)}.{os.getpid()}.tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_samples_csv(path, samples, t=None):
    """Write one velocity cloud; a leading time column when t is given."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[1] != 3:
        raise ValueError("samples must have shape (n, 3)")
    if t is None:
        lines = ["vx,vy,vz\n"]
        lines.extend(",".join(map(_fmt, row)) + "\n" for row in samples)
    else:
        head = _fmt(float(t))
        lines = ["t,vx,vy,vz\n"]
        lines.extend(head + "," + ",".join(map(_fmt, row)) + "\n" for row in samples)
    _atomic_text(path, "".join(lines))


def save_sweep_csv(path, header, rows):
    """Write a small numeric table with a named header row."""
    lines = [",".join(header) + "\n"]
    for row in rows:
        if len(row) != len(header):
            raise ValueError("row width does not match the header")
        lines.append(",".join(map(_fmt, row)) + "\n")
    _atomic_text(path, "".join(lines))


def save_json(path, payload):
    """Persist a JSON document with sorted keys for stable bytes."""
    _atomic_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_samples(path) -> EmpiricalMeasure:
    """Stream a velocity CSV into a uniformly weighted measure.

    Accepts the headers t,vx,vy,vz and vx,vy,vz; all fields are parsed so
    a corrupt time column is reported too. Values accumulate into a flat
    double buffer row by row, keeping memory at the size of the data even
    for million-row files.
    """
    path = os.fspath(path)
    buf = array("d")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}:1: empty file, expected a header row")
        cols = [c.strip().lower() for c in header]
        if cols == ["t", "vx", "vy", "vz"]:
            width = 4
        elif cols == ["vx", "vy", "vz"]:
            width = 3
        else:
            raise ValueError(
                f"{path}:1: header must be t,vx,vy,vz or vx,vy,vz, "
                f"got {','.join(header)!r}"
            )
        for row_num, row in enumerate(reader, start=2):
            if len(row) != width:
                raise ValueError(
                    f"{path}:{row_num}: expected {width} fields, got {len(row)}"
                )
            try:
                values = [float(field) for field in row]
            except ValueError:
                bad = next(f for f in row if not _is_number(f))
                raise ValueError(
                    f"{path}:{row_num}: non-numeric field {bad!r}"
                ) from None
            buf.extend(values[width - 3 :])
    if not buf:
        raise ValueError(f"{path}: no sample rows after the header")
    samples = np.asarray(buf, dtype=np.float64).reshape(-1, 3)
    finite = np.isfinite(samples).all(axis=1)
    if not finite.all():
        raise ValueError(
            f"{path}:{int(np.argmin(finite)) + 2}: non-finite sample row"
        )
    return EmpiricalMeasure.from_samples(samples)


def _is_number(field):
    try:
        float(field)
    except ValueError:
        return False
    return True
