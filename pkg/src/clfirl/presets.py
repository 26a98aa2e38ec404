"""Experiment presets and the synthetic demonstration generator.

Two presets reproduce the benchmark experiments at desk scale:

* ``lqr``: one-step demonstrations of the optimal linear feedback at 120
  uniform states, 11x11 constraint grid on [-5, 5]^2, lambda = 1/241,
  beta = 0.2, deterministic (Sigma = 0).
* ``nonlinear2d``: 4 trajectories x 11 steps of a hand-tuned goal-directed
  policy on the 2-D benchmark, 10x10 grid on [-0.5, 5.5]^2, five-sample
  expectations with sigma = 0.05, beta = 0.2.

The nonlinear demonstrations are synthetic stand-ins for the human data:
they follow the CLF-form policy of a hand-built potential (quadratic pull to
the target plus Gaussian ridges over two artifact-defined obstacle boxes,
which biases the paths around those regions).  All generator parameters live
in the preset so the data is reproducible.
"""

import copy
from dataclasses import dataclass, field

import numpy as np

from .lqr import generate_demonstrations, benchmark_lqr_problem, solve_dare
from .policy import ClfPolicy
from .seeding import stream
from .systems import simulate, system_by_name, zero_perturbation
from .validation import as_state, as_state_batch


class BumpPotential:
    """Quadratic bowl around the target with added Gaussian ridges.

    Exposes eval/grad so it can drive a ClfPolicy directly; the ridges stand
    in for high-cost regions that demonstrations detour around.
    """

    def __init__(self, target, pull=0.5, bumps=()):
        self.target = np.asarray(target, dtype=float)
        self.pull = float(pull)
        self.bumps = [(np.asarray(c, dtype=float), float(a), float(w)) for c, a, w in bumps]

    def eval(self, x):
        x = as_state(x, len(self.target))
        val = self.pull * float(np.sum((x - self.target) ** 2))
        for center, amp, width in self.bumps:
            d2 = float(np.sum((x - center) ** 2))
            val += amp * np.exp(-d2 / (2.0 * width**2))
        return val

    def eval_batch(self, X):
        X = as_state_batch(X, len(self.target))
        val = self.pull * ((X - self.target) ** 2).sum(axis=1)
        for center, amp, width in self.bumps:
            d2 = ((X - center) ** 2).sum(axis=1)
            val = val + amp * np.exp(-d2 / (2.0 * width**2))
        return val

    def grad(self, x):
        x = as_state(x, len(self.target))
        g = 2.0 * self.pull * (x - self.target)
        for center, amp, width in self.bumps:
            d = x - center
            g = g + amp * np.exp(-float(d @ d) / (2.0 * width**2)) * (-d / width**2)
        return g


def make_synthetic_demos(system, generator, rng_seed):
    """Roll out the generator's potential-field policy from its start states."""
    potential = BumpPotential(system.target, pull=generator["pull"],
                              bumps=[tuple(b) for b in generator["bumps"]])
    policy = ClfPolicy(potential, generator["beta"], system)
    pm = zero_perturbation(system.input_dim, rng_seed=rng_seed)
    demos = []
    for i, x0 in enumerate(generator["starts"]):
        traj = simulate(system, policy, pm, np.asarray(x0, dtype=float),
                        generator["horizon"], traj_id=f"demo-{i:02d}", stream_index=i)
        if traj.meta["escaped"]:
            raise RuntimeError(f"synthetic demonstration {i} escaped the bounds; "
                               "generator parameters are inconsistent")
        demos.append(traj)
    return demos


def make_lqr_demos(system, generator, rng_seed):
    problem = benchmark_lqr_problem()
    _, K = solve_dare(problem)
    rng = stream(rng_seed, "lqr-demos")
    return generate_demonstrations(problem, K, system.lower, system.upper,
                                   generator["n_points"], rng)


@dataclass
class ExperimentSpec:
    """Everything needed to run one experiment end to end."""

    name: str
    system_name: str = None
    system_file: str = None            # JSON coefficient file (linear systems)
    target: list = None
    data_file: str = None              # ingest instead of generating
    generator: dict = field(default_factory=dict)
    grid_resolution: int = 11
    lengthscale: float = None
    signal_variance: float = 1.0
    learner: dict = field(default_factory=dict)
    seed: int = 20240801
    export_resolution: int = 50
    n_rollouts: int = 100
    rollout_horizon: int = 500
    dense_refinement: int = 4
    n_export_rollouts: int = 8

    def build_system(self):
        if self.system_file is not None:
            from .systems import load_linear_system
            return load_linear_system(self.system_file)
        if self.system_name is None:
            raise ValueError("experiment needs system_name or system_file")
        return system_by_name(self.system_name, target=self.target)

    def to_dict(self):
        d = copy.deepcopy(self.__dict__)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(**known)


PRESETS = {
    "lqr": {
        "name": "lqr",
        "system_name": "lqr",
        "generator": {"kind": "lqr-optimal", "n_points": 120},
        "grid_resolution": 11,
        "lengthscale": 2.0,
        "learner": {
            "lam": None,               # 1/(120 + 121)
            "beta": 0.2,
            "mc_samples": 1,
            "mc_sigma": 0.0,
            "margin": 0.05,
            "max_outer_iters": 30,
            "max_inner_iters": 100,
        },
        "rollout_horizon": 500,
        "n_rollouts": 100,
    },
    "nonlinear2d": {
        "name": "nonlinear2d",
        "system_name": "nonlinear2d",
        "target": [5.0, 0.0],
        "generator": {
            "kind": "potential-field",
            "beta": 0.2,
            "pull": 0.5,
            "bumps": [[[2.0, 3.5], 2.0, 0.8], [[3.8, 1.8], 1.5, 0.6]],
            "starts": [[0.0, 0.3], [2.6, 4.9], [0.3, 2.4], [4.9, 5.1]],
            "horizon": 11,
        },
        "grid_resolution": 10,
        "lengthscale": 2.4,
        "learner": {
            "lam": None,               # 1/(44 + 100)
            "beta": 0.2,
            "mc_samples": 5,
            "mc_sigma": 0.05,
            "margin": 0.15,
            # buffer between training constraints and the fresh-noise audit
            "margin_eps": 0.02,
            "max_outer_iters": 30,
            "max_inner_iters": 100,
        },
        "rollout_horizon": 1000,
        "n_rollouts": 100,
    },
}


def preset_spec(name, overrides=None):
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    d = copy.deepcopy(PRESETS[name])
    if overrides:
        for key, value in overrides.items():
            if key == "learner":
                d.setdefault("learner", {}).update(value)
            elif key == "generator":
                d.setdefault("generator", {}).update(value)
            else:
                d[key] = value
    return ExperimentSpec.from_dict(d)
