import numpy as np
import pytest

from clfirl.kernels import RkhsFunction, SquaredExponentialKernel
from clfirl.systems import builtin_lqr_system, builtin_nonlinear_system


@pytest.fixture
def lqr_system():
    return builtin_lqr_system()


@pytest.fixture
def nonlinear_system():
    return builtin_nonlinear_system()


@pytest.fixture
def se_kernel():
    return SquaredExponentialKernel(lengthscale=1.0, signal_variance=1.0)


def random_rkhs(rng, n_centers=6, dim=2, lengthscale=1.0, scale=1.0):
    centers = rng.uniform(-3, 3, size=(n_centers, dim))
    weights = scale * rng.standard_normal(n_centers)
    return RkhsFunction(centers, weights, SquaredExponentialKernel(lengthscale=lengthscale))


def finite_difference_gradient(fn, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for d in range(len(x)):
        e = np.zeros_like(x)
        e[d] = h
        grad[d] = (fn(x + e) - fn(x - e)) / (2 * h)
    return grad
