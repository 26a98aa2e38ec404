"""Closed-form control law derived from a candidate control Lyapunov function.

Given a scalar function V with an analytic gradient, the policy is

    pi(x) = -beta [ grad V(f(x)) g(x) ]^T,   beta > 0,

which steers along the descent direction of V seen through the input channel.
Any object exposing ``eval``/``grad`` works as V, so the quadratic value
function of the linear baseline drives the identical code path.
"""

from dataclasses import dataclass

import numpy as np

from .systems import step
from .validation import as_state, check_finite


@dataclass(frozen=True)
class ClfPolicy:
    value_fn: object           # exposes eval(x) and grad(x)
    beta: float
    system: object

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    def action(self, x):
        x = as_state(x, self.system.state_dim)
        y = np.asarray(self.system.drift(x), dtype=float)
        check_finite(y, "drift value", x)
        gy = np.asarray(self.value_fn.grad(y), dtype=float)
        check_finite(gy, "value gradient", y)
        G = np.asarray(self.system.input_gain(x), dtype=float)
        u = -self.beta * (gy @ G)
        check_finite(u, "policy action", x)
        return u

    def closed_loop_map(self, x):
        return step(self.system, x, self.action(x))

    def __call__(self, x):
        return self.action(x)

    def action_batch(self, X):
        return np.stack([self.action(x) for x in np.atleast_2d(X)])
