"""Learning control Lyapunov functions from demonstrations.

Infers a CLF from demonstration trajectories by Lyapunov-constrained kernel
regression, derives the closed-form stabilizing policy, and certifies the
stochastic closed loop empirically.
"""

from .estimator import CLFLearner
from .grids import StabilityGrid, build_grid
from .kernels import RkhsFunction, SquaredExponentialKernel, default_lengthscale
from .learner import (LearnerConfig, LearnerProblem, estimate_lipschitz,
                      expected_decrease, loss, solve)
from .lqr import LqrProblem, QuadraticValue, generate_demonstrations, solve_dare
from .model_io import LearnedModel, load_model, save_model
from .policy import ClfPolicy
from .systems import (ControlAffineSystem, PerturbationModel, Trajectory,
                      builtin_lqr_system, builtin_nonlinear_system, linear_system,
                      load_linear_system, sample_perturbed_action, simulate, step,
                      system_by_name, vanishing_perturbation, zero_perturbation)
from .verifier import CertReport, audit_convergence, audit_dense, audit_grid, certify

__version__ = "0.1.0"

__all__ = [
    "CLFLearner", "CertReport", "ClfPolicy", "ControlAffineSystem",
    "LearnedModel", "LearnerConfig", "LearnerProblem", "LqrProblem",
    "PerturbationModel", "QuadraticValue", "RkhsFunction", "StabilityGrid",
    "SquaredExponentialKernel", "Trajectory", "audit_convergence",
    "audit_dense", "audit_grid", "build_grid", "builtin_lqr_system",
    "builtin_nonlinear_system", "certify", "default_lengthscale",
    "estimate_lipschitz", "expected_decrease", "generate_demonstrations",
    "linear_system", "load_linear_system", "load_model", "loss",
    "sample_perturbed_action",
    "save_model", "simulate", "solve", "solve_dare", "step", "system_by_name",
    "vanishing_perturbation", "zero_perturbation",
]
