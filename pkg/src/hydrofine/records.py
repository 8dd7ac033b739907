"""JSON result records and CSV sweep tables.

Encoding rules: complex scalars become ``[re, im]``; arrays become
``{"shape": [...], "dtype": "real"|"complex", "data": [...]}`` with row-major
data (complex entries as ``[re, im]`` pairs). Floats are written with
``repr`` precision, so :func:`decode_array` reproduces arrays bitwise;
non-finite floats become ``null`` so every record is strict JSON.
"""
import csv
import json
import os
from dataclasses import asdict, is_dataclass

import numpy as np


def encode(obj):
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            flat = [[_num(z.real), _num(z.imag)] for z in obj.ravel()]
            kind = "complex"
        elif obj.dtype == bool:
            flat = [bool(x) for x in obj.ravel()]
            kind = "bool"
        else:
            flat = [_num(x) for x in obj.ravel()]
            kind = "real"
        return {"shape": list(obj.shape), "dtype": kind, "data": flat}
    if isinstance(obj, (complex, np.complexfloating)):
        return [_num(obj.real), _num(obj.imag)]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if is_dataclass(obj) and not isinstance(obj, type):
        return encode(asdict(obj))
    return obj


def _num(x):
    x = float(x)
    return x if np.isfinite(x) else None


def decode_array(d):
    shape = tuple(d["shape"])
    if d["dtype"] == "complex":
        data = np.array(d["data"], dtype=float).reshape(-1, 2) if d["data"] else np.zeros((0, 2))
        # null entries decode to nan
        arr = data[:, 0] + 1j * data[:, 1]
    elif d["dtype"] == "bool":
        arr = np.array(d["data"], dtype=bool)
    else:
        arr = np.array(d["data"], dtype=float)
    return arr.reshape(shape)


def write_record(directory, name, record):
    path = os.path.join(directory, f"{name}.json")
    try:
        os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(encode(record), fh, indent=1, sort_keys=False, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None
    return path


def read_record(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_table(directory, name, columns, rows):
    path = os.path.join(directory, f"{name}.csv")
    try:
        os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([repr(float(row[c])) if _is_number(row[c]) else row[c] for c in columns])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None
    return path


def _is_number(x):
    return isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool)
