"""Readers for the experiment CSV artifacts.

Pure consumers: only the exported CSV files are touched, never model or
config files.
"""

import csv
import os

import numpy as np


def require_file(directory, name):
    path = os.path.join(directory, name)
    if not os.path.exists(path):
        raise FileNotFoundError(f"missing input file: {path}")
    return path


def read_columns(path, required):
    """Read a CSV into named float columns; empty cells become NaN."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        header = [h.strip() for h in header]
        for col in required:
            if col not in header:
                raise ValueError(f"{path}: missing column {col!r} (found {header})")
        rows = [row for row in reader if any(c.strip() for c in row)]
    data = {}
    for j, name in enumerate(header):
        data[name] = np.array([float(r[j]) if j < len(r) and r[j].strip() else np.nan
                               for r in rows])
    return data


def lattice_table(path, value_columns):
    """Reshape a row-major (x1-major) lattice export to grid arrays.

    Returns (x1_values, x2_values, {column: array of shape (n1, n2)}).
    """
    data = read_columns(path, ["x1", "x2"] + list(value_columns))
    x1 = np.unique(data["x1"])
    x2 = np.unique(data["x2"])
    n1, n2 = len(x1), len(x2)
    if n1 * n2 != len(data["x1"]):
        raise ValueError(f"{path}: rows do not form a full lattice "
                         f"({len(data['x1'])} rows, {n1}x{n2} unique coordinates)")
    grids = {col: data[col].reshape(n1, n2) for col in value_columns}
    return x1, x2, grids


def read_trajectories(path):
    """Group a trajectory CSV into {traj_id: (T+1, n) state arrays}."""
    data = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if header[:2] != ["traj_id", "t"]:
            raise ValueError(f"{path}: expected trajectory header, got {header}")
        state_cols = [i for i, h in enumerate(header) if h.startswith("x")]
        order = []
        for row in reader:
            if not row or not row[0].strip():
                continue
            tid = row[0]
            if tid not in data:
                data[tid] = []
                order.append(tid)
            data[tid].append([float(row[i]) for i in state_cols])
    return {tid: np.array(data[tid]) for tid in order}
