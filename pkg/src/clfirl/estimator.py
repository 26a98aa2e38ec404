"""Scikit-learn style estimator facade over the constrained learner.

``CLFLearner.fit`` consumes demonstration trajectories for a known
control-affine system and exposes the learned Lyapunov function through
``predict`` (values), ``predict_gradient`` and ``predict_action``.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .grids import build_grid
from .kernels import SquaredExponentialKernel, default_lengthscale
from .learner import LearnerConfig, solve
from .validation import as_state_batch


class CLFLearner(BaseEstimator):
    """Learns a control Lyapunov function from demonstrations.

    Parameters mirror LearnerConfig; ``lengthscale=None`` selects 20% of the
    largest box side and ``lam=None`` the 1/(N T + N_xi) default.
    """

    def __init__(self, system=None, grid_resolution=11, lengthscale=None,
                 signal_variance=1.0, lam=None, beta=0.2, mc_samples=1,
                 mc_sigma=0.0, demo_sigma=0.0, lipschitz_mode="fixed",
                 margin=0.05, safety_factor=1.2, lipschitz_rounds=3,
                 max_outer_iters=30, max_inner_iters=400, penalty_growth=10.0,
                 tolerance=1e-6, rng_seed=0, inner_solver="lbfgs"):
        self.system = system
        self.grid_resolution = grid_resolution
        self.lengthscale = lengthscale
        self.signal_variance = signal_variance
        self.lam = lam
        self.beta = beta
        self.mc_samples = mc_samples
        self.mc_sigma = mc_sigma
        self.demo_sigma = demo_sigma
        self.lipschitz_mode = lipschitz_mode
        self.margin = margin
        self.safety_factor = safety_factor
        self.lipschitz_rounds = lipschitz_rounds
        self.max_outer_iters = max_outer_iters
        self.max_inner_iters = max_inner_iters
        self.penalty_growth = penalty_growth
        self.tolerance = tolerance
        self.rng_seed = rng_seed
        self.inner_solver = inner_solver

    def _make_kernel(self):
        ls = self.lengthscale
        if ls is None:
            ls = default_lengthscale(self.system.lower, self.system.upper)
        return SquaredExponentialKernel(lengthscale=ls, signal_variance=self.signal_variance)

    def _make_config(self):
        return LearnerConfig(
            lam=self.lam, beta=self.beta, mc_samples=self.mc_samples,
            mc_sigma=self.mc_sigma, demo_sigma=self.demo_sigma,
            lipschitz_mode=self.lipschitz_mode, margin=self.margin,
            safety_factor=self.safety_factor, lipschitz_rounds=self.lipschitz_rounds,
            max_outer_iters=self.max_outer_iters, max_inner_iters=self.max_inner_iters,
            penalty_growth=self.penalty_growth, tolerance=self.tolerance,
            rng_seed=self.rng_seed, inner_solver=self.inner_solver)

    def fit(self, X, y=None):
        """Fit to a list of Trajectory objects; returns self."""
        if self.system is None:
            raise ValueError("CLFLearner requires a system")
        if not X:
            raise ValueError("need at least one demonstration trajectory")
        bounds = list(zip(self.system.lower, self.system.upper))
        grid = build_grid(bounds, self.grid_resolution, self.system.target)
        self.kernel_ = self._make_kernel()
        self.model_ = solve(list(X), self.system, grid, self._make_config(), self.kernel_)
        self.value_ = self.model_.V
        self.alpha_ = self.model_.V.weights
        self.n_data_states_ = self.model_.n_data_states
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("CLFLearner is not fitted yet; call fit first")

    def predict(self, X):
        """Learned Lyapunov-function values at the given states."""
        self._check_fitted()
        return self.value_.eval_batch(as_state_batch(X, self.system.state_dim))

    def predict_gradient(self, X):
        self._check_fitted()
        return self.value_.grad_batch(as_state_batch(X, self.system.state_dim))

    def predict_action(self, X):
        """Closed-form policy actions at the given states."""
        self._check_fitted()
        policy = self.model_.policy(self.system)
        return np.stack([policy.action(x) for x in as_state_batch(X, self.system.state_dim)])

    def score(self, X, y=None):
        """Negative mean one-step reproduction error over trajectories."""
        self._check_fitted()
        policy = self.model_.policy(self.system)
        errs = []
        for traj in X:
            prev, nxt = traj.transitions
            for a, b in zip(prev, nxt):
                errs.append(np.linalg.norm(b - policy.closed_loop_map(a)))
        return -float(np.mean(errs))
