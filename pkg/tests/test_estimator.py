import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from clfirl.estimator import CLFLearner
from clfirl.grids import build_grid
from clfirl.kernels import RkhsFunction, SquaredExponentialKernel
from clfirl.policy import ClfPolicy
from clfirl.systems import builtin_nonlinear_system, simulate, zero_perturbation


@pytest.fixture(scope="module")
def demos_and_system():
    system = builtin_nonlinear_system()
    lattice = build_grid(list(zip(system.lower, system.upper)), 5, system.target)
    kernel = SquaredExponentialKernel(lengthscale=1.8)
    targets = 0.5 * ((lattice.points - system.target) ** 2).sum(axis=1)
    w = np.linalg.solve(kernel.gram(lattice.points) + 1e-10 * np.eye(25), targets)
    policy = ClfPolicy(RkhsFunction(lattice.points, w, kernel), 0.2, system)
    pm = zero_perturbation(2)
    demos = [simulate(system, policy, pm, np.array(x0), 6, traj_id=f"e{i}")
             for i, x0 in enumerate([[1.0, 1.5], [3.5, 4.0]])]
    return demos, system


def test_get_set_params_round_trip(demos_and_system):
    _, system = demos_and_system
    est = CLFLearner(system=system, margin=0.03, lengthscale=1.7)
    params = est.get_params()
    assert params["margin"] == 0.03
    assert params["lengthscale"] == 1.7
    est.set_params(margin=0.08)
    assert est.margin == 0.08
    cloned = clone(est)
    assert cloned.get_params()["margin"] == 0.08
    assert not hasattr(cloned, "model_")


def test_fit_predict_shapes(demos_and_system):
    demos, system = demos_and_system
    est = CLFLearner(system=system, grid_resolution=4, lengthscale=1.8,
                     margin=0.02, max_outer_iters=10, max_inner_iters=60,
                     tolerance=1e-5, rng_seed=1)
    out = est.fit(demos)
    assert out is est
    X = np.array([[1.0, 1.0], [2.0, 2.0], [4.0, 1.0]])
    values = est.predict(X)
    assert values.shape == (3,)
    grads = est.predict_gradient(X)
    assert grads.shape == (3, 2)
    actions = est.predict_action(X)
    assert actions.shape == (3, 2)
    assert est.alpha_.shape == (est.model_.V.centers.shape[0],)
    assert np.isfinite(est.score(demos))


def test_predict_before_fit_raises(demos_and_system):
    _, system = demos_and_system
    est = CLFLearner(system=system)
    with pytest.raises(NotFittedError):
        est.predict([[0.0, 0.0]])


def test_fit_requires_system_and_data(demos_and_system):
    demos, _ = demos_and_system
    with pytest.raises(ValueError, match="system"):
        CLFLearner().fit(demos)
    with pytest.raises(ValueError, match="at least one"):
        CLFLearner(system=demos_and_system[1]).fit([])


def test_auto_lengthscale_uses_box_rule(demos_and_system):
    demos, system = demos_and_system
    est = CLFLearner(system=system, grid_resolution=3, margin=0.005,
                     max_outer_iters=8, max_inner_iters=60, tolerance=1e-4,
                     rng_seed=2)
    est.fit(demos)
    # 20% of the largest side of [-0.5, 5.5]^2
    assert float(np.atleast_1d(est.kernel_.lengthscale)[0]) == pytest.approx(1.2)
