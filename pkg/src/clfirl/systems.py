"""Discrete-time control-affine systems and stochastic closed-loop simulation.

Dynamics are x_{t+1} = f(x_t) + g(x_t) u_t on a compact box, with a unique
target state inside the box.  Demonstrator actions may carry zero-mean
truncated-normal perturbations whose covariance vanishes at the target.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .seeding import stream
from .validation import as_state, check_bounds_box, check_finite


@dataclass(frozen=True)
class ControlAffineSystem:
    state_dim: int
    input_dim: int
    drift: callable            # x -> x'
    input_gain: callable       # x -> (n, m) matrix
    lower: np.ndarray
    upper: np.ndarray
    target: np.ndarray
    name: str = "system"

    def __post_init__(self):
        lower, upper = check_bounds_box(self.lower, self.upper)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "target", as_state(self.target, self.state_dim))
        if lower.shape[0] != self.state_dim:
            raise ValueError("bounds dimension does not match state_dim")
        if not self.contains(self.target):
            raise ValueError(f"target {self.target} lies outside bounds")
        self._probe_finiteness()

    def _probe_finiteness(self):
        # f and g cannot be checked at every state; probe corners, target and
        # a small seeded interior sample.
        rng = np.random.default_rng(0)
        probes = [self.target, self.lower, self.upper]
        n = self.state_dim
        for corner in range(min(2**n, 16)):
            mask = [(corner >> d) & 1 for d in range(n)]
            probes.append(np.where(mask, self.upper, self.lower))
        probes.extend(rng.uniform(self.lower, self.upper, size=(8, n)))
        for x in probes:
            check_finite(self.drift(x), "drift value", x)
            g = np.asarray(self.input_gain(x), dtype=float)
            if g.shape != (self.state_dim, self.input_dim):
                raise ValueError(f"input_gain must return a "
                                 f"{self.state_dim}x{self.input_dim} matrix, got {g.shape}")
            check_finite(g, "input gain", x)

    def contains(self, x, atol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - atol) & np.all(x <= self.upper + atol))

    def drift_batch(self, X):
        return np.stack([np.asarray(self.drift(x), dtype=float) for x in np.atleast_2d(X)])

    def gain_batch(self, X):
        return np.stack([np.asarray(self.input_gain(x), dtype=float) for x in np.atleast_2d(X)])

    def sample_states(self, n, rng):
        return rng.uniform(self.lower, self.upper, size=(n, self.state_dim))


@dataclass(frozen=True)
class PerturbationModel:
    """State-dependent action-perturbation covariance with truncation.

    ``covariance(x)`` must return a symmetric PSD (m, m) matrix that vanishes
    at the system target.  ``sqrt_mode`` selects the matrix square root used
    in g(x) sqrt(Sigma(x)) w: 'elementwise' (the default, matching the
    notation used throughout) or 'cholesky' for non-diagonal covariances.
    """

    covariance: callable
    truncation: int = 100
    rng_seed: int = 0
    sqrt_mode: str = "elementwise"

    def __post_init__(self):
        if self.sqrt_mode not in ("elementwise", "cholesky"):
            raise ValueError(f"unknown sqrt_mode {self.sqrt_mode!r}")
        if self.truncation < 1:
            raise ValueError("truncation must be at least 1")

    def sqrt_at(self, x):
        sigma = np.asarray(self.covariance(x), dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValueError(f"covariance must be square, got shape {sigma.shape}")
        if not np.allclose(sigma, sigma.T, atol=1e-12):
            raise ValueError(f"covariance not symmetric at {x}")
        if np.allclose(sigma, 0.0):
            return np.zeros_like(sigma)
        if self.sqrt_mode == "cholesky":
            # tiny jitter keeps PSD boundary cases factorable
            return np.linalg.cholesky(sigma + 1e-15 * np.eye(len(sigma)))
        if np.any(sigma < -1e-12):
            raise ValueError(f"element-wise sqrt needs nonnegative entries at {x}")
        eigs = np.linalg.eigvalsh(sigma)
        if eigs.min() < -1e-9:
            raise ValueError(f"covariance not PSD at {x}: min eigenvalue {eigs.min()}")
        return np.sqrt(np.maximum(sigma, 0.0))


def zero_perturbation(input_dim, rng_seed=0):
    """Sigma(x) = 0: deterministic demonstrations."""
    z = np.zeros((input_dim, input_dim))
    return PerturbationModel(covariance=lambda x: z, rng_seed=rng_seed)


def vanishing_perturbation(sigma, target, input_dim, rho=1.0, rng_seed=0,
                           truncation=100, sqrt_mode="elementwise"):
    """Sigma(x) = sigma^2 (1 - exp(-||x - x*||^2 / rho^2)) I.

    Smoothly interpolates between isotropic noise far from the target and
    zero noise at the target, as the vanishing-variance assumption requires.
    """
    target = np.asarray(target, dtype=float)
    eye = np.eye(input_dim)

    def cov(x):
        d2 = float(np.sum((np.asarray(x, dtype=float) - target) ** 2))
        return sigma**2 * (1.0 - math.exp(-d2 / rho**2)) * eye

    return PerturbationModel(covariance=cov, rng_seed=rng_seed,
                             truncation=truncation, sqrt_mode=sqrt_mode)


@dataclass
class Trajectory:
    """Time-indexed state sequence with optional applied actions."""

    states: np.ndarray                 # (T+1, n)
    actions: np.ndarray = None         # (T, m) or None
    traj_id: str = "traj"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if self.actions is not None:
            self.actions = np.atleast_2d(np.asarray(self.actions, dtype=float))
            if len(self.actions) != len(self.states) - 1:
                raise ValueError("actions must be exactly one shorter than states")

    def __len__(self):
        return len(self.states)

    @property
    def transitions(self):
        """Pairs (x_{t-1}, x_t) stacked as two (T, n) arrays."""
        return self.states[:-1], self.states[1:]

    def validate_bounds(self, system):
        for t, x in enumerate(self.states):
            if not system.contains(x):
                raise ValueError(f"trajectory {self.traj_id!r}: state at step {t} "
                                 f"outside bounds: {x}")
        return self


def step(system, x, u):
    """One dynamics step f(x) + g(x) u; the caller checks containment."""
    x = as_state(x, system.state_dim)
    u = as_state(u, system.input_dim)
    if not system.contains(x):
        raise ValueError(f"state {x} outside bounds")
    check_finite(u, "input", x)
    nxt = np.asarray(system.drift(x), dtype=float) + np.asarray(system.input_gain(x), dtype=float) @ u
    check_finite(nxt, "next state", x)
    return nxt


def sample_perturbed_action(policy_mean, x, pm, system, rng=None, meta=None):
    """Draw policy_mean + sqrt(Sigma(x)) w, resampling until the next state
    stays inside the bounds.

    After ``pm.truncation`` rejected draws the unperturbed mean is returned
    and the event is counted in ``meta['truncation_fallbacks']``.
    """
    policy_mean = as_state(policy_mean, system.input_dim)
    x = as_state(x, system.state_dim)
    root = pm.sqrt_at(x)
    if not root.any():
        return policy_mean.copy()
    if rng is None:
        rng = stream(pm.rng_seed, "action")
    for _ in range(pm.truncation):
        u = policy_mean + root @ rng.standard_normal(system.input_dim)
        if system.contains(step(system, x, u)):
            return u
    if meta is not None:
        meta["truncation_fallbacks"] = meta.get("truncation_fallbacks", 0) + 1
    return policy_mean.copy()


def simulate(system, policy, pm, x0, horizon, traj_id="rollout", stream_index=0):
    """Roll out the stochastic closed loop for ``horizon`` steps.

    Deterministic given ``pm.rng_seed`` and ``stream_index`` (independent
    rollouts use distinct stream indices).  If a state escapes the bounds the
    trajectory is truncated there and flagged in ``meta['escaped']``.
    """
    x0 = as_state(x0, system.state_dim)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if not system.contains(x0):
        raise ValueError(f"initial state {x0} outside bounds")
    rng = np.random.default_rng(np.random.SeedSequence([int(pm.rng_seed), int(stream_index)]))
    meta = {"escaped": False, "escape_step": None, "truncation_fallbacks": 0}
    states = [x0]
    actions = []
    x = x0
    for t in range(horizon):
        mean = as_state(policy(x), system.input_dim)
        u = sample_perturbed_action(mean, x, pm, system, rng=rng, meta=meta)
        nxt = step(system, x, u)
        actions.append(u)
        if not system.contains(nxt):
            states.append(nxt)
            meta["escaped"] = True
            meta["escape_step"] = t + 1
            break
        states.append(nxt)
        x = nxt
    return Trajectory(states=np.array(states), actions=np.array(actions),
                      traj_id=traj_id, meta=meta)


# ---------------------------------------------------------------------------
# Built-in benchmark systems
# ---------------------------------------------------------------------------

def linear_system(A, B, lower, upper, target=None, name="linear"):
    """x_{t+1} = A x + B u restricted to a box."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n, m = B.shape
    if A.shape != (n, n):
        raise ValueError(f"A must be {n}x{n}, got {A.shape}")
    if target is None:
        target = np.zeros(n)
    return ControlAffineSystem(
        state_dim=n, input_dim=m,
        drift=lambda x: A @ x,
        input_gain=lambda x: B,
        lower=lower, upper=upper, target=target, name=name,
    )


LQR_A = np.array([[1.0, 0.1], [0.0, 0.9]])
LQR_B = np.eye(2)


def builtin_lqr_system():
    """The linear benchmark: A = [[1, .1], [0, .9]], B = I on [-5, 5]^2."""
    return linear_system(LQR_A, LQR_B, lower=[-5.0, -5.0], upper=[5.0, 5.0],
                         target=[0.0, 0.0], name="lqr")


def _sigmoid_ripple(x):
    """s(x) = (2 / (1 + exp(x - 2.5)) - 1) sin^2(pi x / 5)."""
    return (2.0 / (1.0 + np.exp(x - 2.5)) - 1.0) * np.sin(np.pi * x / 5.0) ** 2


def builtin_nonlinear_system(target=(5.0, 0.0)):
    """The 2-D goal-reaching benchmark on [-0.5, 5.5]^2.

    The target position is a configuration choice (the task only fixes the
    goal qualitatively, in the bottom-right of the box); (5, 0) is a fixed
    point of the drift.
    """

    def drift(x):
        x1, x2 = float(x[0]), float(x[1])
        return np.array([
            x1 * (1.0 + _sigmoid_ripple(x1)),
            x2 * (1.0 + _sigmoid_ripple(x2) * np.cos(np.pi * x2 / 5.0) ** 2),
        ])

    def input_gain(x):
        x1, x2 = float(x[0]), float(x[1])
        coef = 2.0 - np.cos(np.pi * x2 / 5.0) ** 2 * np.sin(np.pi * x1 / 5.0) ** 2
        return coef * np.eye(2)

    return ControlAffineSystem(
        state_dim=2, input_dim=2, drift=drift, input_gain=input_gain,
        lower=[-0.5, -0.5], upper=[5.5, 5.5], target=target, name="nonlinear2d",
    )


def system_by_name(name, target=None):
    if name == "lqr":
        return builtin_lqr_system()
    if name == "nonlinear2d":
        return builtin_nonlinear_system() if target is None else builtin_nonlinear_system(target)
    raise ValueError(f"unknown system {name!r} (expected 'lqr' or 'nonlinear2d')")


def load_linear_system(path):
    """Linear system from a JSON coefficient file.

    Schema: A and B as row-major nested lists, plus lower/upper bounds and an
    optional target (defaults to the origin) and name.
    """
    import json

    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    missing = [k for k in ("A", "B", "lower", "upper") if k not in d]
    if missing:
        raise ValueError(f"{path}: missing keys {missing}")
    return linear_system(d["A"], d["B"], d["lower"], d["upper"],
                         target=d.get("target"),
                         name=d.get("name", "linear-file"))
