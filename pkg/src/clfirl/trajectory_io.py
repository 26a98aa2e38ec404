"""Trajectory CSV format: header traj_id,t,x1,...,xn[,u1,...,um].

One row per time step, UTF-8, '.' decimal separator.  Action columns are
optional; when present they are written for every step except the last of a
trajectory (no action is applied at the final state).  Floats round-trip at
full precision (shortest repr).
"""

import csv

import numpy as np

from .errors import IngestError
from .systems import Trajectory


def write_trajectories(path, trajectories, include_actions=None):
    if not trajectories:
        raise ValueError("no trajectories to write")
    n = trajectories[0].states.shape[1]
    if include_actions is None:
        include_actions = all(t.actions is not None for t in trajectories)
    m = trajectories[0].actions.shape[1] if include_actions else 0
    header = ["traj_id", "t"] + [f"x{i+1}" for i in range(n)] + [f"u{i+1}" for i in range(m)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for traj in trajectories:
            for t, x in enumerate(traj.states):
                row = [traj.traj_id, t] + [repr(float(v)) for v in x]
                if include_actions:
                    if t < len(traj.states) - 1:
                        row += [repr(float(v)) for v in traj.actions[t]]
                    else:
                        row += [""] * m
                writer.writerow(row)
    return path


def ingest_trajectories(path, system):
    """Parse, bounds-validate and group a trajectory CSV.

    Trajectories keep file order; rows are sorted by t within a trajectory
    and must be strictly increasing with no duplicates.  Any out-of-bounds
    state fails with its row number.
    """
    n = system.state_dim
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot open trajectory file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        expected_prefix = ["traj_id", "t"] + [f"x{i+1}" for i in range(n)]
        if [h.strip() for h in header[:2 + n]] != expected_prefix:
            raise IngestError(f"{path}: bad header {header!r}, expected {expected_prefix} "
                              f"(+ optional action columns)")
        m = len(header) - 2 - n
        rows = {}
        order = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2 + n:
                raise IngestError(f"{path}:{lineno}: expected at least {2 + n} columns")
            tid = row[0].strip()
            try:
                t = int(row[1])
                x = np.array([float(v) for v in row[2:2 + n]])
            except ValueError as exc:
                raise IngestError(f"{path}:{lineno}: {exc}") from exc
            if not system.contains(x):
                raise IngestError(f"{path}:{lineno}: state {x} outside bounds "
                                  f"[{system.lower}, {system.upper}]")
            action = None
            if m > 0:
                cells = [c.strip() for c in row[2 + n:2 + n + m]]
                if any(cells):
                    try:
                        action = np.array([float(v) for v in cells])
                    except ValueError as exc:
                        raise IngestError(f"{path}:{lineno}: {exc}") from exc
            if tid not in rows:
                rows[tid] = []
                order.append(tid)
            elif rows[tid]:
                last_t = rows[tid][-1][0]
                if t == last_t:
                    raise IngestError(f"{path}:{lineno}: duplicate (traj_id={tid!r}, t={t})")
                if t < last_t:
                    raise IngestError(f"{path}:{lineno}: non-monotone t in trajectory "
                                      f"{tid!r} ({last_t} followed by {t})")
            rows[tid].append((t, x, action, lineno))

    if not rows:
        raise IngestError(f"{path}: no data rows")

    trajectories = []
    for tid in order:
        entries = rows[tid]
        states = np.array([x for _, x, _, _ in entries])
        actions = [a for _, _, a, _ in entries]
        if all(a is not None for a in actions[:-1]) and len(actions) > 1:
            action_arr = np.array(actions[:-1])
        else:
            action_arr = None
        trajectories.append(Trajectory(states=states, actions=action_arr, traj_id=tid))
    return trajectories
