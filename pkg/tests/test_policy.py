import numpy as np
import pytest

from clfirl.kernels import RkhsFunction, SquaredExponentialKernel
from clfirl.lqr import QuadraticValue, benchmark_lqr_problem, solve_dare
from clfirl.policy import ClfPolicy
from clfirl.systems import LQR_A, LQR_B

from conftest import random_rkhs


def zero_value(se_kernel):
    return RkhsFunction(np.zeros((2, 2)), np.zeros(2), se_kernel)


def test_zero_value_gives_zero_action(lqr_system, se_kernel):
    policy = ClfPolicy(zero_value(se_kernel), beta=0.2, system=lqr_system)
    for x in ([0.0, 0.0], [3.0, -4.0], [-5.0, 5.0]):
        assert np.allclose(policy.action(x), 0.0)
        # closed loop reduces to the drift
        assert np.allclose(policy.closed_loop_map(x), lqr_system.drift(x))


def test_quadratic_value_linear_system_closed_form(lqr_system):
    # for V(x) = x'Px on x+ = Ax + Bu the policy is -2 beta B'PAx
    rng = np.random.default_rng(30)
    P = np.array([[2.0, 0.3], [0.3, 1.1]])
    beta = 0.2
    policy = ClfPolicy(QuadraticValue(P), beta=beta, system=lqr_system)
    for _ in range(10):
        x = rng.uniform(-5, 5, size=2)
        expected = -2.0 * beta * LQR_B.T @ P @ LQR_A @ x
        assert np.allclose(policy.action(x), expected, rtol=1e-12)


def test_action_linear_in_beta(lqr_system):
    V = random_rkhs(np.random.default_rng(31))
    x = [1.0, 2.0]
    u1 = ClfPolicy(V, beta=0.2, system=lqr_system).action(x)
    u2 = ClfPolicy(V, beta=0.4, system=lqr_system).action(x)
    assert np.allclose(u2, 2.0 * u1)


def test_action_linear_in_weights(lqr_system):
    rng = np.random.default_rng(32)
    kernel = SquaredExponentialKernel(1.0)
    centers = rng.uniform(-3, 3, size=(5, 2))
    a1, a2 = rng.standard_normal(5), rng.standard_normal(5)
    x = rng.uniform(-4, 4, size=2)
    act = lambda w: ClfPolicy(RkhsFunction(centers, w, kernel), 0.2, lqr_system).action(x)
    assert np.allclose(act(a1 + a2), act(a1) + act(a2), rtol=1e-10, atol=1e-14)


def test_descent_alignment(lqr_system, nonlinear_system):
    # grad V(f(x)) g(x) action(x) = -beta ||grad V(f(x)) g(x)||^2 <= 0
    rng = np.random.default_rng(33)
    for system in (lqr_system, nonlinear_system):
        V = random_rkhs(rng, n_centers=8)
        policy = ClfPolicy(V, beta=0.3, system=system)
        for _ in range(20):
            x = rng.uniform(system.lower, system.upper)
            y = np.asarray(system.drift(x))
            row = V.grad(y) @ np.asarray(system.input_gain(x))
            u = policy.action(x)
            assert float(row @ u) == pytest.approx(-0.3 * float(row @ row), rel=1e-10, abs=1e-12)
            assert float(row @ u) <= 0.0


def test_equilibrium_fixed_point(nonlinear_system):
    # V minimized at x* (single kernel bump of negative weight), f(x*) = x*
    kernel = SquaredExponentialKernel(1.0)
    V = RkhsFunction([nonlinear_system.target], [-1.0], kernel)
    policy = ClfPolicy(V, beta=0.2, system=nonlinear_system)
    assert np.allclose(policy.closed_loop_map(nonlinear_system.target),
                       nonlinear_system.target, atol=1e-12)


def test_lqr_value_drives_policy_through_same_path(lqr_system):
    # the DARE value function plugs into the identical code path
    P, K = solve_dare(benchmark_lqr_problem())
    policy = ClfPolicy(QuadraticValue(P), beta=0.2, system=lqr_system)
    assert policy.action([1.0, 1.0]).shape == (2,)


def test_beta_must_be_positive(lqr_system, se_kernel):
    with pytest.raises(ValueError, match="beta"):
        ClfPolicy(zero_value(se_kernel), beta=0.0, system=lqr_system)
