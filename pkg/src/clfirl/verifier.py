"""Post-hoc stability certification of a learned model.

Three audits: the discretized decrease conditions re-checked with fresh
noise and larger sample counts; the same check on a refinement-times finer
lattice outside the residual ball B_xi; and an empirical convergence audit
that rolls out the stochastic closed loop and counts trajectories entering
B_xi.  Audits never mutate the model and are deterministic given their seed.
"""

from dataclasses import dataclass, field

import numpy as np

from .grids import refine_lattice
from .learner import DecreaseEvaluator, constraint_noise, derived_seed
from .systems import simulate


@dataclass
class CertReport:
    grid_pass: bool = False
    worst_margin: float = float("nan")
    worst_point: list = None
    equilibrium_decrease: float = float("nan")
    dense_pass: bool = None
    dense_violations: int = None
    dense_worst_value: float = None
    dense_worst_point: list = None
    mc_fraction: float = None
    mc_median_hitting_time: float = None
    mc_rollouts: int = None
    mc_escaped: int = None
    lipschitz_used: float = None
    tightening: float = float("nan")
    seeds: dict = field(default_factory=dict)
    sample_counts: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.grid_pass and not self.worst_margin > 0:
            raise ValueError("grid_pass requires a positive worst margin")

    @property
    def passed(self):
        ok = self.grid_pass
        if self.dense_pass is not None:
            ok = ok and self.dense_pass
        if self.mc_fraction is not None:
            ok = ok and self.mc_fraction == 1.0
        return ok

    def to_dict(self):
        d = {}
        for key, value in self.__dict__.items():
            if isinstance(value, (np.floating, np.integer)):
                value = value.item()
            if isinstance(value, float) and np.isnan(value):
                value = None
            d[key] = value
        return d

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        for key in ("worst_margin", "tightening"):
            if known.get(key) is None:
                known[key] = float("nan")
        return cls(**known)


def _evaluator(model, system, pm, points, samples, seed):
    noise, _ = constraint_noise(system, pm, points, samples, seed)
    return DecreaseEvaluator(system, points, model.V.kernel, model.V.centers,
                             model.beta, noise)


def audit_grid(model, grid, system, pm, sample_factor=10, seed=0,
               reuse_training_noise=False, eq_slack=None):
    """Re-check the decrease constraints at every grid point.

    By default the noise draws are independent of training (fresh seed,
    ``sample_factor`` times the training sample count) to guard against
    overfitting to common random numbers.  With ``reuse_training_noise`` the
    learner's own seed and sample count are used, reproducing its final
    constraint values exactly.
    """
    trained_samples = int(model.training_meta.get("mc_samples_used", 1))
    if reuse_training_noise:
        samples = trained_samples
        noise_seed = int(model.training_meta.get("constraint_noise_seed", 0))
    else:
        samples = trained_samples * sample_factor
        noise_seed = derived_seed(seed, "audit-grid")
    ev = _evaluator(model, system, pm, grid.points, samples, noise_seed)
    ed = ev.values(model.V.weights)

    eq = grid.equilibrium_index
    noneq = grid.non_equilibrium_indices()
    margins = -ed[noneq] - grid.tightening
    worst_idx = int(np.argmin(margins))
    worst_margin = float(margins[worst_idx])
    if eq_slack is None:
        eq_slack = float(model.config_echo.get("tolerance", 1e-6))
    eq_ok = ed[eq] <= eq_slack
    return CertReport(
        grid_pass=bool(worst_margin > 0 and eq_ok),
        worst_margin=worst_margin,
        worst_point=[float(v) for v in grid.points[noneq[worst_idx]]],
        equilibrium_decrease=float(ed[eq]),
        tightening=float(grid.tightening),
        seeds={"grid": noise_seed},
        sample_counts={"grid": samples},
    )


def audit_dense(model, system, pm, refinement, sample_factor=10, seed=0):
    """Expected decrease on a ``refinement``-times finer lattice outside B_xi.

    Reports the number of non-decreasing points and the worst location; the
    residual ball B_xi is centered at the system target with radius equal to
    the grid constant.
    """
    grid = model.grid
    points = refine_lattice(grid, refinement)
    keep = np.linalg.norm(points - system.target, axis=1) > grid.grid_constant
    points = points[keep]
    samples = int(model.training_meta.get("mc_samples_used", 1)) * sample_factor
    noise_seed = derived_seed(seed, "audit-dense")
    ev = _evaluator(model, system, pm, points, samples, noise_seed)
    ed = ev.values(model.V.weights)
    violations = int((ed >= 0.0).sum())
    worst = int(np.argmax(ed))
    return {
        "dense_pass": violations == 0,
        "dense_violations": violations,
        "dense_worst_value": float(ed[worst]),
        "dense_worst_point": [float(v) for v in points[worst]],
        "seed": noise_seed,
        "samples": samples,
        "points_checked": len(points),
    }


def audit_convergence(model, system, pm, n_rollouts, horizon, seed=0):
    """Fraction of closed-loop rollouts entering B_xi within the horizon.

    Starts are sampled uniformly in the bounds; a start already inside B_xi
    counts as a hit at t = 0.  Escaped or non-converging rollouts count as
    misses.  Also reports the median hitting time over the hits.
    """
    if n_rollouts < 1:
        raise ValueError("n_rollouts must be at least 1")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    policy = model.policy(system)
    xi = model.grid.grid_constant
    rng = np.random.default_rng(np.random.SeedSequence([derived_seed(seed, "audit-starts")]))
    starts = system.sample_states(n_rollouts, rng)
    hits = []
    escaped = 0
    for i, x0 in enumerate(starts):
        if np.linalg.norm(x0 - system.target) <= xi:
            hits.append(0)
            continue
        if horizon == 0:
            continue
        traj = simulate(system, policy, pm, x0, horizon,
                        traj_id=f"audit-{i:03d}", stream_index=i)
        if traj.meta.get("escaped"):
            escaped += 1
            continue
        dist = np.linalg.norm(traj.states - system.target, axis=1)
        inside = np.nonzero(dist <= xi)[0]
        if len(inside):
            hits.append(int(inside[0]))
    return {
        "mc_fraction": len(hits) / float(n_rollouts),
        "mc_median_hitting_time": float(np.median(hits)) if hits else None,
        "mc_rollouts": int(n_rollouts),
        "mc_escaped": escaped,
        "seed": seed,
    }


def certify(model, system, pm, refinement=4, n_rollouts=100, horizon=500, seed=0,
            sample_factor=10):
    """Full certification: grid audit, dense audit, convergence audit."""
    report = audit_grid(model, model.grid, system, pm,
                        sample_factor=sample_factor, seed=seed)
    dense = audit_dense(model, system, pm, refinement,
                        sample_factor=sample_factor, seed=seed)
    conv = audit_convergence(model, system, pm, n_rollouts, horizon, seed=seed)
    report.dense_pass = dense["dense_pass"]
    report.dense_violations = dense["dense_violations"]
    report.dense_worst_value = dense["dense_worst_value"]
    report.dense_worst_point = dense["dense_worst_point"]
    report.mc_fraction = conv["mc_fraction"]
    report.mc_median_hitting_time = conv["mc_median_hitting_time"]
    report.mc_rollouts = conv["mc_rollouts"]
    report.mc_escaped = conv["mc_escaped"]
    report.lipschitz_used = model.training_meta.get("lipschitz_used")
    report.seeds.update({"dense": dense["seed"], "convergence": seed})
    report.sample_counts.update({"dense": dense["samples"]})
    return report
