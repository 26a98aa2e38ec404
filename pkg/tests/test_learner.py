import logging

import numpy as np
import pytest

from clfirl.grids import build_grid
from clfirl.kernels import RkhsFunction, SquaredExponentialKernel
from clfirl.learner import (LearnerConfig, LearnerProblem, constraint_noise,
                            estimate_lipschitz, expected_decrease, loss)
from clfirl.policy import ClfPolicy
from clfirl.systems import (builtin_nonlinear_system, linear_system, simulate,
                            vanishing_perturbation, zero_perturbation)


def nonlinear_setup(n_grid=4, lengthscale=1.5, **config_kw):
    system = builtin_nonlinear_system()
    grid = build_grid(list(zip(system.lower, system.upper)), n_grid, system.target)
    kernel = SquaredExponentialKernel(lengthscale=lengthscale)
    config = LearnerConfig(**config_kw)
    return system, grid, kernel, config


def drift_demos(system, starts, horizon=5):
    pm = zero_perturbation(system.input_dim)
    return [simulate(system, lambda x: np.zeros(system.input_dim), pm,
                     np.asarray(x0, float), horizon, traj_id=f"d{i}")
            for i, x0 in enumerate(starts)]


# ----------------------------------------------------------------- loss

def test_loss_zero_for_drift_demos_at_zero_alpha():
    # demos generated by the zero policy have e = 0 when alpha = 0
    system, grid, kernel, config = nonlinear_setup()
    demos = drift_demos(system, [[1.0, 1.0], [2.0, 3.0]])
    problem = LearnerProblem(demos, system, grid, config, kernel)
    assert problem.loss(np.zeros(problem.n_weights)) == pytest.approx(0.0, abs=1e-25)


def test_loss_alpha_zero_is_drift_error():
    system, grid, kernel, config = nonlinear_setup()
    pm = zero_perturbation(2)
    demos = [simulate(system, lambda x: np.array([0.1, -0.05]), pm, [1.0, 2.0], 6)]
    problem = LearnerProblem(demos, system, grid, config, kernel)
    prev, nxt = demos[0].transitions
    expected = sum(np.sum((b - np.asarray(system.drift(a))) ** 2)
                   for a, b in zip(prev, nxt))
    assert problem.loss(np.zeros(problem.n_weights)) == pytest.approx(expected, rel=1e-12)


def test_loss_self_consistency_generate_then_score():
    # demos generated by a ClfPolicy whose weights live on the grid-center
    # block: scoring that alpha with lambda = 0, Sigma = 0 gives ~zero loss
    system, grid, kernel, config = nonlinear_setup(n_grid=5, lam=1e-12)
    config = LearnerConfig(lam=None, beta=0.2)
    # bowl-shaped V over the grid centers: kernel interpolation of |x - x*|^2
    targets = 0.5 * ((grid.points - system.target) ** 2).sum(axis=1)
    w = np.linalg.solve(kernel.gram(grid.points) + 1e-10 * np.eye(len(grid.points)),
                        targets)
    V_gen = RkhsFunction(grid.points, w, kernel)
    policy = ClfPolicy(V_gen, 0.2, system)
    pm = zero_perturbation(2)
    demos = [simulate(system, policy, pm, x0, 6, traj_id=f"sc{i}")
             for i, x0 in enumerate([np.array([1.0, 1.5]), np.array([3.5, 4.0])])]
    assert not any(d.meta["escaped"] for d in demos)

    problem = LearnerProblem(demos, system, grid,
                             LearnerConfig(lam=1e-300, beta=0.2), kernel)
    alpha_gen = np.concatenate([np.zeros(problem.n_data_states), w])
    assert problem.loss(alpha_gen) < 1e-18


def test_loss_public_op_checks_alpha_length():
    system, grid, kernel, config = nonlinear_setup()
    demos = drift_demos(system, [[1.0, 1.0]])
    with pytest.raises(ValueError, match="alpha must have length"):
        loss(np.zeros(3), demos, system, grid, config, kernel)


def test_loss_quadratic_in_alpha():
    # a 3-point parabola fit along random directions is exact
    system, grid, kernel, config = nonlinear_setup()
    demos = drift_demos(system, [[1.0, 1.0], [4.0, 2.0]])
    problem = LearnerProblem(demos, system, grid, config, kernel)
    rng = np.random.default_rng(50)
    a0 = rng.standard_normal(problem.n_weights)
    for _ in range(5):
        d = rng.standard_normal(problem.n_weights)
        f = lambda t: problem.loss(a0 + t * d)
        fm, f0, fp = f(-1.0), f(0.0), f(1.0)
        # parabola through (-1, 0, 1): f(t) = f0 + t(fp - fm)/2 + t^2 (fp + fm - 2 f0)/2
        t = 0.5
        predicted = f0 + t * (fp - fm) / 2 + t**2 * (fp + fm - 2 * f0) / 2
        assert f(t) == pytest.approx(predicted, rel=1e-9, abs=1e-12)


def test_gamma_weighting_and_singular_fallback(caplog):
    # rank-deficient g makes g Sigma g' singular: identity fallback + warning
    A = np.zeros((2, 2))
    B = np.array([[1.0, 0.0], [0.0, 0.0]])
    system = linear_system(A, B, [-2, -2], [2, 2])
    grid = build_grid([(-2, 2), (-2, 2)], 3, target=[0, 0])
    kernel = SquaredExponentialKernel(1.0)
    demos = drift_demos(system, [[1.0, 1.0]], horizon=3)
    config = LearnerConfig(demo_sigma=0.1)
    with caplog.at_level(logging.WARNING, logger="clfirl.learner"):
        problem = LearnerProblem(demos, system, grid, config, kernel)
    assert "falling back to identity" in caplog.text
    assert np.isfinite(problem.loss(np.zeros(problem.n_weights)))


def test_gamma_weighting_scales_loss():
    # full-rank g with isotropic Sigma: Gamma = (g Sigma g')^-1 rescales the
    # drift-only error by 1 / (gain^2 sigma_x^2) per transition
    A = np.zeros((2, 2))
    system = linear_system(A, 2.0 * np.eye(2), [-3, -3], [3, 3])
    grid = build_grid([(-3, 3), (-3, 3)], 3, target=[0, 0])
    kernel = SquaredExponentialKernel(1.0)
    pm = zero_perturbation(2)
    demos = [simulate(system, lambda x: np.array([0.2, 0.1]), pm, [1.0, 1.0], 2)]
    sigma = 0.5
    config = LearnerConfig(demo_sigma=sigma, mc_rho=1.0)
    problem = LearnerProblem(demos, system, grid, config, kernel)
    prev, nxt = demos[0].transitions
    expected = 0.0
    for a, b in zip(prev, nxt):
        d2 = float(np.sum((a - system.target) ** 2))
        var = sigma**2 * (1 - np.exp(-d2)) * 4.0   # gain^2 = 4
        expected += np.sum((b - np.asarray(system.drift(a))) ** 2) / var
    assert problem.loss(np.zeros(problem.n_weights)) == pytest.approx(expected, rel=1e-9)


# ----------------------------------------------- expected decrease

def test_expected_decrease_zero_alpha():
    system, grid, kernel, _ = nonlinear_setup()
    V = RkhsFunction(grid.points, np.zeros(len(grid.points)), kernel)
    policy = ClfPolicy(V, 0.2, system)
    pm = vanishing_perturbation(0.05, system.target, 2)
    for x in ([1.0, 1.0], [4.0, 4.0]):
        assert expected_decrease(policy, x, pm, mc_samples=5, point_seed=3) == 0.0


def test_expected_decrease_at_fixed_point():
    # V minimized exactly at the drift fixed point x*: policy leaves it there
    system = builtin_nonlinear_system()
    kernel = SquaredExponentialKernel(1.0)
    V = RkhsFunction([system.target], [-1.0], kernel)
    policy = ClfPolicy(V, 0.2, system)
    pm = zero_perturbation(2)
    assert expected_decrease(policy, system.target, pm) == pytest.approx(0.0, abs=1e-15)


def test_expected_decrease_deterministic_given_seed():
    system, grid, kernel, _ = nonlinear_setup()
    rng = np.random.default_rng(51)
    V = RkhsFunction(grid.points, rng.standard_normal(len(grid.points)), kernel)
    policy = ClfPolicy(V, 0.2, system)
    pm = vanishing_perturbation(0.05, system.target, 2)
    v1 = expected_decrease(policy, [2.0, 3.0], pm, mc_samples=5, point_seed=17)
    v2 = expected_decrease(policy, [2.0, 3.0], pm, mc_samples=5, point_seed=17)
    assert v1 == v2
    v3 = expected_decrease(policy, [2.0, 3.0], pm, mc_samples=5, point_seed=18)
    assert v1 != v3


def test_expected_decrease_matches_vectorized_evaluator():
    system, grid, kernel, config = nonlinear_setup(mc_sigma=0.0)
    demos = drift_demos(system, [[1.0, 1.0]])
    problem = LearnerProblem(demos, system, grid, config, kernel)
    rng = np.random.default_rng(52)
    alpha = 0.1 * rng.standard_normal(problem.n_weights)
    ed_vec = problem.expected_decrease_values(alpha)
    policy = problem.policy(alpha)
    pm = zero_perturbation(2)
    for i, x in enumerate(grid.points):
        assert ed_vec[i] == pytest.approx(expected_decrease(policy, x, pm), rel=1e-9,
                                          abs=1e-12)


# ----------------------------------------------- Lipschitz estimation

class LinearValue:
    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)

    def eval(self, x):
        return float(self.c @ np.asarray(x, dtype=float))

    def eval_batch(self, X):
        return np.atleast_2d(X) @ self.c

    def grad(self, x):
        return self.c.copy()


def test_estimate_lipschitz_zero_alpha():
    system, grid, kernel, _ = nonlinear_setup()
    V = RkhsFunction(grid.points, np.zeros(len(grid.points)), kernel)
    policy = ClfPolicy(V, 0.2, system)
    pm = zero_perturbation(2)
    assert estimate_lipschitz(policy, grid, pm) == 0.0


def test_estimate_lipschitz_linear_value_hand_instance():
    # f(x) = 0 and g = 0 give ED(x) = V(0) - V(x); for linear V = c'x the
    # true Lipschitz constant is ||c||
    c = np.array([0.6, -0.8])
    system = linear_system(np.zeros((2, 2)), np.zeros((2, 2)), [-1, -1], [1, 1])
    grid = build_grid([(-1, 1), (-1, 1)], 3, target=[0, 0])
    policy = ClfPolicy(LinearValue(c), 0.2, system)
    pm = zero_perturbation(2)
    est = estimate_lipschitz(policy, grid, pm, safety_factor=1.2)
    assert est >= np.linalg.norm(c)
    assert est == pytest.approx(1.2 * np.linalg.norm(c), rel=1e-6)


def test_estimate_lipschitz_safety_factor_scales():
    system, grid, kernel, _ = nonlinear_setup()
    rng = np.random.default_rng(53)
    V = RkhsFunction(grid.points, rng.standard_normal(len(grid.points)), kernel)
    policy = ClfPolicy(V, 0.2, system)
    pm = zero_perturbation(2)
    l1 = estimate_lipschitz(policy, grid, pm, safety_factor=1.0)
    l2 = estimate_lipschitz(policy, grid, pm, safety_factor=2.0)
    assert l2 == pytest.approx(2.0 * l1, rel=1e-12)
    assert l1 > 0


# ----------------------------------------------- analytic gradients

@pytest.mark.parametrize("mc_sigma,mc_samples", [(0.0, 1), (0.05, 3)])
def test_objective_and_constraint_gradients_match_fd(mc_sigma, mc_samples):
    system, grid, kernel, config = nonlinear_setup(
        n_grid=3, mc_sigma=mc_sigma, mc_samples=mc_samples, margin=0.1)
    demos = drift_demos(system, [[1.0, 1.0], [4.0, 3.0]], horizon=3)
    problem = LearnerProblem(demos, system, grid, config, kernel)
    problem.tightening = config.margin
    rng = np.random.default_rng(54)
    h = 1e-6
    for _ in range(10):
        alpha = 0.3 * rng.standard_normal(problem.n_weights)
        grad = problem.loss_grad(alpha)
        _, jac = problem.constraints_and_jac(alpha)
        for _ in range(3):
            d = rng.standard_normal(problem.n_weights)
            d /= np.linalg.norm(d)
            fd_loss = (problem.loss(alpha + h * d) - problem.loss(alpha - h * d)) / (2 * h)
            assert fd_loss == pytest.approx(float(grad @ d), rel=1e-5, abs=1e-8)
            cs_p = problem.constraints(alpha + h * d)
            cs_m = problem.constraints(alpha - h * d)
            fd_cons = (cs_p - cs_m) / (2 * h)
            assert np.allclose(jac @ d, fd_cons, rtol=1e-5, atol=1e-8)


# ----------------------------------------------- noise plumbing

def test_constraint_noise_common_random_numbers():
    system = builtin_nonlinear_system()
    pm = vanishing_perturbation(0.05, system.target, 2)
    pts = np.array([[1.0, 1.0], [4.0, 4.0]])
    e1, c1 = constraint_noise(system, pm, pts, 5, seed=99)
    e2, c2 = constraint_noise(system, pm, pts, 5, seed=99)
    assert np.array_equal(e1, e2)
    assert not c1
    e3, _ = constraint_noise(system, pm, pts, 5, seed=100)
    assert not np.array_equal(e1, e3)


def test_constraint_noise_collapses_when_sigma_zero():
    system = builtin_nonlinear_system()
    pm = zero_perturbation(2)
    eta, collapsed = constraint_noise(system, pm, np.array([[1.0, 1.0]]), 5, seed=0)
    assert collapsed
    assert eta.shape == (1, 1, 2)
    assert np.all(eta == 0.0)
