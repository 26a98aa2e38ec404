"""Figure builders: value-function contours and the CLF surface view."""

import logging
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .tables import lattice_table, read_trajectories, require_file

logger = logging.getLogger(__name__)

LEARNED_COLOR = "tab:green"
TRUTH_COLOR = "tab:blue"
DEMO_COLOR = "purple"


@dataclass
class PlotJob:
    input_dir: str
    output_path: str
    levels: int = 12
    colormap: str = "viridis"
    dpi: int = 200


def _save(fig, job):
    out_dir = os.path.dirname(os.path.abspath(job.output_path))
    os.makedirs(out_dir, exist_ok=True)
    fig.savefig(job.output_path, dpi=job.dpi, bbox_inches="tight")
    plt.close(fig)
    return job.output_path


def _level_values(grid, count):
    # explicit interior levels so each family draws exactly `count` contours
    lo, hi = float(grid.min()), float(grid.max())
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, count + 2)[1:-1]


def lqr_contour_figure(job):
    """Learned CLF contours (solid) over the ground-truth value (dashed)."""
    surface = require_file(job.input_dir, "surface.csv")
    truth = require_file(job.input_dir, "ground_truth.csv")
    x1, x2, sgrid = lattice_table(surface, ["V"])
    tx1, tx2, tgrid = lattice_table(truth, ["Vstar"])

    fig, ax = plt.subplots(figsize=(5.2, 4.6))
    truth_cs = ax.contour(tx1, tx2, tgrid["Vstar"].T,
                          levels=_level_values(tgrid["Vstar"], job.levels),
                          colors=TRUTH_COLOR, linestyles="dashed", linewidths=1.0)
    learned_cs = ax.contour(x1, x2, sgrid["V"].T,
                            levels=_level_values(sgrid["V"], job.levels),
                            colors=LEARNED_COLOR, linewidths=1.3)

    n_demo = 0
    demo_path = os.path.join(job.input_dir, "training_data.csv")
    if os.path.exists(demo_path):
        for states in read_trajectories(demo_path).values():
            ax.plot(states[:, 0], states[:, 1], "*", color=DEMO_COLOR,
                    markersize=4, alpha=0.8)
            n_demo += len(states)
    else:
        logger.warning("no training_data.csv in %s; skipping data markers",
                       job.input_dir)

    ax.plot([], [], color=TRUTH_COLOR, linestyle="dashed", label="ground truth")
    ax.plot([], [], color=LEARNED_COLOR, label="learned CLF")
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    ax.set_title("Value-function contours")
    ax.legend(loc="upper right", fontsize=8)
    meta = {"learned_levels": len(learned_cs.levels),
            "truth_levels": len(truth_cs.levels),
            "demo_points": n_demo}
    return fig, meta


def plot_lqr_contours(job):
    fig, _ = lqr_contour_figure(job)
    return _save(fig, job)


def clf_surface_figure(job):
    """Filled CLF projection with gradient streamlines and rollout overlays."""
    surface = require_file(job.input_dir, "surface.csv")
    require_file(job.input_dir, "policy.csv")
    rollouts = require_file(job.input_dir, "rollouts.csv")
    x1, x2, sgrid = lattice_table(surface, ["V"])
    V = sgrid["V"]

    fig, ax = plt.subplots(figsize=(5.6, 4.6))
    filled = ax.contourf(x1, x2, V.T, levels=max(job.levels * 2, 20),
                         cmap=job.colormap)
    fig.colorbar(filled, ax=ax, label="$V$")

    # streamlines along the descent direction of V
    dV1, dV2 = np.gradient(V, x1, x2)
    ax.streamplot(x1, x2, -dV1.T, -dV2.T, color="black", density=1.1,
                  linewidth=0.6, arrowsize=0.8)

    trajectories = read_trajectories(rollouts)
    if trajectories:
        for states in trajectories.values():
            ax.plot(states[:, 0], states[:, 1], color=LEARNED_COLOR, linewidth=1.4)
            ax.plot(states[0, 0], states[0, 1], "o", color=LEARNED_COLOR,
                    markersize=3)
    else:
        logger.warning("rollouts file %s has no trajectories; plotting without "
                       "overlays", rollouts)

    ax.set_xlim(x1.min(), x1.max())
    ax.set_ylim(x2.min(), x2.max())
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    ax.set_title("Learned CLF with gradient streamlines")
    meta = {"rollouts": len(trajectories), "colormap": job.colormap}
    return fig, meta


def plot_clf_surface(job):
    fig, _ = clf_surface_figure(job)
    return _save(fig, job)


FIGURES = {
    "lqr-contours": plot_lqr_contours,
    "clf-surface": plot_clf_surface,
}
