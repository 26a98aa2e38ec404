"""Equidistant stability grids for the discretized decrease constraints."""

from dataclasses import dataclass, field

import numpy as np

from .validation import as_state, check_bounds_box


@dataclass
class StabilityGrid:
    """Lattice X_xi with grid constant xi and a tightening margin.

    ``grid_constant`` is the worst-case distance from any box point to its
    nearest lattice point (half the cell diagonal for an equidistant lattice
    including the corners).  ``equilibrium_index`` points at the lattice
    point nearest the task target.
    """

    points: np.ndarray
    grid_constant: float
    equilibrium_index: int
    resolution: tuple
    lower: np.ndarray
    upper: np.ndarray
    tightening: float = 0.0
    spacing: np.ndarray = field(default=None)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if not 0 <= self.equilibrium_index < len(self.points):
            raise ValueError("equilibrium_index out of range")

    @property
    def equilibrium(self):
        return self.points[self.equilibrium_index]

    def non_equilibrium_indices(self):
        return np.array([i for i in range(len(self.points))
                         if i != self.equilibrium_index], dtype=int)

    def to_dict(self):
        return {
            "resolution": [int(r) for r in self.resolution],
            "lower": [float(v) for v in self.lower],
            "upper": [float(v) for v in self.upper],
            "grid_constant": float(self.grid_constant),
            "equilibrium_index": int(self.equilibrium_index),
            "tightening": float(self.tightening),
        }

    @classmethod
    def from_dict(cls, d):
        grid = build_grid(list(zip(d["lower"], d["upper"])), d["resolution"], target=None,
                          _equilibrium_index=d["equilibrium_index"])
        grid.tightening = float(d["tightening"])
        return grid


def build_grid(bounds, resolution, target, _equilibrium_index=None):
    """Equidistant lattice over the box, corners included.

    ``bounds`` is a sequence of (lower, upper) pairs, ``resolution`` the
    per-axis point counts (>= 2).  The grid constant is half the cell
    diagonal; the target snaps to the nearest lattice point.
    """
    bounds = np.asarray(bounds, dtype=float)
    lower, upper = check_bounds_box(bounds[:, 0], bounds[:, 1])
    resolution = np.atleast_1d(np.asarray(resolution, dtype=int))
    if resolution.size == 1:
        resolution = np.full(len(lower), int(resolution[0]))
    if len(resolution) != len(lower):
        raise ValueError("resolution must give one integer per axis")
    if np.any(resolution < 2):
        raise ValueError("resolution must be at least 2 per axis")

    axes = [np.linspace(lo, hi, r) for lo, hi, r in zip(lower, upper, resolution)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    spacing = (upper - lower) / (resolution - 1)
    xi = 0.5 * float(np.linalg.norm(spacing))

    if _equilibrium_index is not None:
        eq = int(_equilibrium_index)
    else:
        target = as_state(target, len(lower))
        eq = int(np.argmin(((points - target) ** 2).sum(axis=1)))

    return StabilityGrid(points=points, grid_constant=xi, equilibrium_index=eq,
                         resolution=tuple(int(r) for r in resolution),
                         lower=lower, upper=upper, spacing=spacing)


def refine_lattice(grid, refinement):
    """Lattice with ``refinement``-times finer cells over the same box."""
    refinement = int(refinement)
    if refinement < 2:
        raise ValueError("refinement must be at least 2")
    res = [(r - 1) * refinement + 1 for r in grid.resolution]
    axes = [np.linspace(lo, hi, r) for lo, hi, r in zip(grid.lower, grid.upper, res)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)
