"""Deterministic artifact writers: every file carries the resolved config and seed."""
from __future__ import annotations

import json
import math
import os

import numpy as np


def jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps(payload):
    return json.dumps(jsonable(payload), sort_keys=True, indent=2) + "\n"


def write_json(path, payload, config=None, seed=None):
    body = dict(payload)
    if config is not None:
        body["config"] = config
    if seed is not None:
        body["seed"] = seed
    with open(path, "w") as fh:
        fh.write(dumps(body))
    return path


def header_line(config, seed):
    """One-line ``#``-prefixed JSON header for CSV artifacts."""
    return "# " + json.dumps(jsonable({"config": config, "seed": seed}), sort_keys=True) + "\n"


def write_trajectory_csv(path, state, config=None, seed=None):
    """Rows ``k, g1..gd, v`` for every lattice point and every solved step."""
    d = state.disc.d
    with open(path, "w") as fh:
        if config is not None:
            fh.write(header_line(config, seed))
        fh.write(",".join(["k"] + [f"g{i + 1}" for i in range(d)] + ["v"]) + "\n")
        for k in range(state.steps_done + 1):
            vk = state.values[k]
            for idx in np.ndindex(*vk.shape):
                fh.write(f"{k}," + ",".join(str(i) for i in idx) + f",{float(vk[idx])!r}\n")
    return path


def read_csv_rows(path):
    """Data rows of a CSV artifact, skipping ``#`` header lines and the column line."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    return [ln.split(",") for ln in lines[1:] if ln]


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
