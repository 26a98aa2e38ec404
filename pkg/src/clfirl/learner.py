"""Lyapunov-constrained kernel regression.

The candidate V lives in the RKHS spanned by kernel sections at all
demonstration states and all grid points (representer form), so the decision
variable is the weight vector alpha.  The objective is the weighted one-step
prediction error of the closed-form CLF policy plus the squared RKHS norm:

    sum_j  e_j' Gamma_j e_j + lambda alpha' K alpha,
    e_j = x_j+ - f(x_j) - g(x_j) pi(x_j),     pi(x) = -beta [grad V(f(x)) g(x)]'

Because pi is linear in alpha, the objective is an explicit quadratic in
alpha and is assembled once.  The decrease constraints

    E[Delta V(x_i)] <= -(tightening + eps)   at non-equilibrium grid points,
    E[Delta V(x*)]  <= 0,
    V(x*) <= V(x_i)                          (grid-minimum anchoring)

are nonlinear in alpha (V is evaluated at the alpha-dependent next state);
they are handled by an augmented Lagrangian with analytic gradients and
common random numbers, so every constraint is a smooth deterministic
function of alpha.
"""

import hashlib
import logging
from dataclasses import dataclass, asdict

import numpy as np

from .errors import InfeasibilityError, LineSearchError
from .kernels import RkhsFunction
from .policy import ClfPolicy
from .systems import zero_perturbation, vanishing_perturbation

logger = logging.getLogger(__name__)


@dataclass
class LearnerConfig:
    """Solver configuration; lam=None means the 1/(N T + N_xi) default."""

    lam: float = None
    beta: float = 0.2
    mc_samples: int = 1
    mc_sigma: float = 0.0
    mc_rho: float = 1.0
    demo_sigma: float = 0.0          # demonstrator noise model for Gamma weights
    lipschitz_mode: str = "fixed"    # "fixed" | "estimated"
    margin: float = 0.05             # tightening when fixed; initial guess otherwise
    safety_factor: float = 1.2
    lipschitz_rounds: int = 3
    max_outer_iters: int = 30
    max_inner_iters: int = 400
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    tolerance: float = 1e-6
    margin_eps: float = 1e-6
    rng_seed: int = 0
    inner_solver: str = "newton"     # "newton" | "lbfgs" | "gd"
    decrease_bounds: np.ndarray = None  # optional per-grid-point E[dV] upper bounds

    def __post_init__(self):
        if self.lam is not None and not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be at least 1")
        if self.lipschitz_mode not in ("fixed", "estimated"):
            raise ValueError("lipschitz_mode must be 'fixed' or 'estimated'")
        if self.inner_solver not in ("newton", "lbfgs", "gd"):
            raise ValueError("inner_solver must be 'newton', 'lbfgs' or 'gd'")
        if not self.penalty_growth > 1:
            raise ValueError("penalty_growth must exceed 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")

    def effective_lambda(self, n_transitions, n_grid):
        if self.lam is not None:
            return float(self.lam)
        return 1.0 / float(n_transitions + n_grid)

    def perturbation(self, system):
        if self.mc_sigma == 0.0:
            return zero_perturbation(system.input_dim, rng_seed=self.rng_seed)
        return vanishing_perturbation(self.mc_sigma, system.target, system.input_dim,
                                      rho=self.mc_rho, rng_seed=self.rng_seed)

    def echo(self):
        d = asdict(self)
        if d["decrease_bounds"] is not None:
            d["decrease_bounds"] = [float(v) for v in np.asarray(d["decrease_bounds"]).ravel()]
        return d


def derived_seed(seed, label):
    """Stable integer sub-seed for a named stream."""
    digest = hashlib.sha256(f"{int(seed)}|{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def constraint_noise(system, pm, points, mc_samples, seed):
    """Per-point noise displacements g(x) sqrt(Sigma(x)) omega, shape (P, S, n).

    omega draws depend only on (seed, point index), so re-evaluating with the
    same seed reproduces identical displacements (common random numbers).
    Returns (eta, collapsed) where collapsed is True when Sigma vanished at
    every point and a single zero sample suffices.
    """
    points = np.atleast_2d(points)
    roots = [pm.sqrt_at(x) for x in points]
    if not any(r.any() for r in roots):
        return np.zeros((len(points), 1, system.state_dim)), True
    eta = np.zeros((len(points), mc_samples, system.state_dim))
    for i, (x, root) in enumerate(zip(points, roots)):
        if not root.any():
            continue
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), i]))
        omega = rng.standard_normal((mc_samples, system.input_dim))
        G = np.asarray(system.input_gain(x), dtype=float)
        eta[i] = omega @ root.T @ G.T
    return eta, False


class DecreaseEvaluator:
    """Vectorized E[Delta V] at fixed points under the CLF policy.

    ``noise`` holds the fixed displacement draws (P, S, n); the closed-loop
    next states are x+ = f(x) + g(x) pi(x) + noise with pi linear in alpha.
    """

    def __init__(self, system, points, kernel, centers, beta, noise):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.kernel = kernel
        self.centers = centers
        self.beta = float(beta)
        self.noise = noise
        self.Y = system.drift_batch(self.points)                  # (P, n)
        G = system.gain_batch(self.points)                        # (P, n, m)
        self.kap = kernel.pairwise(self.points, centers)          # (P, C)
        W = kernel.grad_x(self.Y, centers)                        # (P, C, n)
        # x+ = Y + Bmat @ alpha + eta, with Bmat = -beta g g' W'
        GGt = np.einsum("pnm,pkm->pnk", G, G)
        self.Bmat = -self.beta * np.einsum("pnk,pck->pnc", GGt, W)  # (P, n, C)

    def next_states(self, alpha):
        det = self.Y + np.einsum("pnc,c->pn", self.Bmat, alpha)
        return det[:, None, :] + self.noise                       # (P, S, n)

    def values(self, alpha):
        P, S, n = self.noise.shape
        xp = self.next_states(alpha).reshape(P * S, n)
        kp = self.kernel.pairwise(xp, self.centers).reshape(P, S, -1)
        return (kp.mean(axis=1) - self.kap) @ alpha

    def values_and_jac(self, alpha):
        P, S, n = self.noise.shape
        xp = self.next_states(alpha).reshape(P * S, n)
        kp, dkp = self.kernel.pairwise_and_grad(xp, self.centers)
        kp = kp.reshape(P, S, -1)
        dkp = dkp.reshape(P, S, -1, n)
        kbar = kp.mean(axis=1)
        values = (kbar - self.kap) @ alpha
        grad_v_plus = np.einsum("pscn,c->psn", dkp, alpha)        # grad V at x+
        jac = kbar - self.kap + np.einsum("pnc,psn->pc", self.Bmat, grad_v_plus) / S
        return values, jac


class TransitionLoss:
    """Quadratic-in-alpha data loss with precomputed Hessian and linear term."""

    def __init__(self, data, system, kernel, centers, beta, lam, demo_pm=None):
        X0 = np.concatenate([traj.states[:-1] for traj in data])
        X1 = np.concatenate([traj.states[1:] for traj in data])
        self.n_transitions = len(X0)
        Y = system.drift_batch(X0)
        G = system.gain_batch(X0)
        resid = X1 - Y
        gammas = self._weights(demo_pm, X0, G, system)
        W = kernel.grad_x(Y, centers)
        GGt = np.einsum("jnm,jkm->jnk", G, G)
        Bmat = -float(beta) * np.einsum("jnk,jck->jnc", GGt, W)   # (M, n, C)
        self.resid = resid
        self.Bmat = Bmat
        self.gammas = gammas
        if gammas is None:
            self.H = np.einsum("jnc,jnd->cd", Bmat, Bmat)
            self.b = np.einsum("jnc,jn->c", Bmat, resid)
        else:
            GB = np.einsum("jnk,jkc->jnc", gammas, Bmat)
            self.H = np.einsum("jnc,jnd->cd", Bmat, GB)
            self.b = np.einsum("jnc,jn->c", GB, resid)
        self.gram = kernel.gram(centers)
        self.lam = float(lam)
        self.Hfull = self.H + self.lam * self.gram
        # symmetrize against accumulated round-off so gradients stay exact
        self.Hfull = 0.5 * (self.Hfull + self.Hfull.T)

    @staticmethod
    def _weights(demo_pm, X0, G, system):
        """Gamma_j = (g Sigma g')^{-1}; identity for deterministic demos."""
        if demo_pm is None:
            return None
        covs = []
        for x, Gx in zip(X0, G):
            sigma = np.asarray(demo_pm.covariance(x), dtype=float)
            covs.append(Gx @ sigma @ Gx.T)
        if all(np.allclose(c, 0.0) for c in covs):
            return None
        gammas = np.empty((len(X0), G.shape[1], G.shape[1]))
        eye = np.eye(G.shape[1])
        for j, c in enumerate(covs):
            try:
                if np.linalg.cond(c) > 1e12:
                    raise np.linalg.LinAlgError("ill-conditioned")
                gammas[j] = np.linalg.inv(c)
            except np.linalg.LinAlgError:
                logger.warning("singular g' Sigma g at transition %d; "
                               "falling back to identity weighting", j)
                gammas[j] = eye
        return gammas

    def value(self, alpha):
        # residual form: the expanded quadratic cancels catastrophically
        # near an exact fit, and the self-consistency contract needs ~1e-18
        errors = self.resid - np.einsum("jnc,c->jn", self.Bmat, alpha)
        if self.gammas is None:
            data_term = float((errors**2).sum())
        else:
            data_term = float(np.einsum("jn,jnk,jk->", errors, self.gammas, errors))
        reg = self.lam * float(alpha @ self.gram @ alpha) if self.lam else 0.0
        return data_term + reg

    def grad(self, alpha):
        return 2.0 * (self.Hfull @ alpha - self.b)


class LearnerProblem:
    """Assembled objective and constraints for a data/grid/config triple."""

    def __init__(self, data, system, grid, config, kernel):
        if not data:
            raise ValueError("need at least one demonstration trajectory")
        for traj in data:
            traj.validate_bounds(system)
        self.system = system
        self.grid = grid
        self.config = config
        self.kernel = kernel
        self.data_states = np.concatenate([traj.states for traj in data])
        self.centers = np.concatenate([self.data_states, grid.points])
        self.n_data_states = len(self.data_states)
        n_transitions = sum(len(traj) - 1 for traj in data)
        self.lam = config.effective_lambda(n_transitions, len(grid.points))

        demo_pm = None
        if config.demo_sigma > 0:
            demo_pm = vanishing_perturbation(config.demo_sigma, system.target,
                                             system.input_dim, rho=config.mc_rho)
        self.loss_term = TransitionLoss(data, system, kernel, self.centers,
                                        config.beta, self.lam, demo_pm)

        pm = config.perturbation(system)
        self.constraint_noise_seed = derived_seed(config.rng_seed, "constraint-noise")
        samples = 1 if config.mc_sigma == 0.0 else config.mc_samples
        noise, collapsed = constraint_noise(system, pm, grid.points, samples,
                                            self.constraint_noise_seed)
        self.mc_samples_used = noise.shape[1]
        self.decrease = DecreaseEvaluator(system, grid.points, kernel,
                                          self.centers, config.beta, noise)
        self.eq = grid.equilibrium_index
        self.noneq = grid.non_equilibrium_indices()
        # grid-minimum anchoring rows: V(x*) - V(x_i) as linear functions
        kap = self.decrease.kap
        self.anchor_rows = kap[self.eq][None, :] - kap[self.noneq]
        self.tightening = float(grid.tightening)

    @property
    def n_weights(self):
        return len(self.centers)

    def decrease_upper_bounds(self):
        """Required E[Delta V] upper bound per grid point."""
        ub = np.full(len(self.grid.points), -(self.tightening + self.config.margin_eps))
        ub[self.eq] = 0.0
        if self.config.decrease_bounds is not None:
            override = np.asarray(self.config.decrease_bounds, dtype=float).ravel()
            if len(override) != len(ub):
                raise ValueError("decrease_bounds must give one bound per grid point")
            ub = override
        return ub

    def loss(self, alpha):
        return self.loss_term.value(np.asarray(alpha, dtype=float))

    def loss_grad(self, alpha):
        return self.loss_term.grad(np.asarray(alpha, dtype=float))

    def expected_decrease_values(self, alpha):
        return self.decrease.values(np.asarray(alpha, dtype=float))

    def constraints(self, alpha):
        """All inequality constraints c(alpha) <= 0, decrease first, anchors last."""
        alpha = np.asarray(alpha, dtype=float)
        ed = self.decrease.values(alpha)
        return np.concatenate([ed - self.decrease_upper_bounds(), self.anchor_rows @ alpha])

    def constraints_and_jac(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        ed, jac = self.decrease.values_and_jac(alpha)
        cs = np.concatenate([ed - self.decrease_upper_bounds(), self.anchor_rows @ alpha])
        J = np.concatenate([jac, self.anchor_rows], axis=0)
        return cs, J

    def constraint_point(self, index):
        """Grid point behind constraint ``index`` (for diagnostics)."""
        n_grid = len(self.grid.points)
        if index < n_grid:
            return self.grid.points[index]
        return self.grid.points[self.noneq[index - n_grid]]

    def value_function(self, alpha):
        return RkhsFunction(self.centers, alpha, self.kernel)

    def policy(self, alpha):
        return ClfPolicy(self.value_function(alpha), self.config.beta, self.system)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def loss(alpha, data, system, grid, config, kernel):
    """Weighted one-step prediction error plus lambda alpha' K alpha."""
    problem = LearnerProblem(data, system, grid, config, kernel)
    alpha = np.asarray(alpha, dtype=float)
    if len(alpha) != problem.n_weights:
        raise ValueError(f"alpha must have length {problem.n_weights}, got {len(alpha)}")
    return problem.loss(alpha)


def expected_decrease(policy, x, pm, mc_samples=1, point_seed=0, omega=None):
    """Monte Carlo estimate of E[V(x+) | x] - V(x) under the CLF closed loop.

    The draws are fixed by ``point_seed`` (or supplied directly as ``omega``),
    so repeated calls give identical values.  With a vanishing covariance the
    estimate collapses to the deterministic one-step difference.
    """
    x = np.asarray(x, dtype=float)
    system = policy.system
    V = policy.value_fn
    u = policy.action(x)
    det = np.asarray(system.drift(x), dtype=float) + np.asarray(system.input_gain(x), dtype=float) @ u
    root = pm.sqrt_at(x)
    if not root.any():
        return float(V.eval(det) - V.eval(x))
    if omega is None:
        rng = np.random.default_rng(np.random.SeedSequence([int(point_seed)]))
        omega = rng.standard_normal((mc_samples, system.input_dim))
    G = np.asarray(system.input_gain(x), dtype=float)
    xplus = det[None, :] + omega @ root.T @ G.T
    vals = V.eval_batch(xplus) if hasattr(V, "eval_batch") else np.array([V.eval(p) for p in xplus])
    return float(vals.mean() - V.eval(x))


def estimate_lipschitz(policy, grid, pm, mc_samples=1, safety_factor=1.2,
                       seed=0, fd_step=1e-4):
    """Upper estimate of the Lipschitz constant of x -> E[Delta V(x)].

    Central finite differences of the expected decrease over the grid points
    plus cell midpoints (a 2x-refined lattice), with common noise draws per
    sample point; the max gradient norm is scaled by ``safety_factor``.
    """
    from .grids import refine_lattice

    V = policy.value_fn
    if hasattr(V, "weights") and not np.any(V.weights):
        return 0.0
    samples = refine_lattice(grid, 2)
    # keep the stencil inside the box (dynamics are only contracted there)
    samples = np.clip(samples, grid.lower + fd_step, grid.upper - fd_step)
    n = samples.shape[1]
    worst = 0.0
    for j, x in enumerate(samples):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), j]))
        need_noise = pm.sqrt_at(x).any()
        omega = rng.standard_normal((mc_samples, policy.system.input_dim)) if need_noise else None
        grad = np.zeros(n)
        for d in range(n):
            e = np.zeros(n)
            e[d] = fd_step
            hi = expected_decrease(policy, x + e, pm, mc_samples, omega=omega)
            lo = expected_decrease(policy, x - e, pm, mc_samples, omega=omega)
            grad[d] = (hi - lo) / (2.0 * fd_step)
        worst = max(worst, float(np.linalg.norm(grad)))
    return safety_factor * worst


# ---------------------------------------------------------------------------
# Augmented Lagrangian solver
# ---------------------------------------------------------------------------

def _al_value(problem, alpha, mu, rho):
    """Augmented Lagrangian value only (cheap path for line searches)."""
    L = problem.loss(alpha)
    cs = problem.constraints(alpha)
    shifted = mu / rho + cs
    active = shifted > 0
    value = L + 0.5 * rho * float(shifted[active] @ shifted[active]) \
        - 0.5 * float(mu @ mu) / rho
    return value, cs


def _al_value_grad(problem, alpha, mu, rho):
    """Rockafellar augmented Lagrangian for inequalities, with gradient."""
    L = problem.loss(alpha)
    dL = problem.loss_grad(alpha)
    cs, J = problem.constraints_and_jac(alpha)
    shifted = mu / rho + cs
    active = shifted > 0
    value = L + 0.5 * rho * float(shifted[active] @ shifted[active]) \
        - 0.5 * float(mu @ mu) / rho
    grad = dL + rho * (shifted[active] @ J[active])
    return value, grad, cs, J


def _armijo(problem, alpha, direction, value, grad, mu, rho, trace):
    """Backtracking line search (factor 0.5, c = 1e-4, initial step 1)."""
    slope = float(grad @ direction)
    step = 1.0
    for _ in range(60):
        candidate = alpha + step * direction
        val, _ = _al_value(problem, candidate, mu, rho)
        if not np.isfinite(val):
            raise LineSearchError("non-finite value in line search", trace=list(trace))
        if val <= value + 1e-4 * step * slope:
            val, g, cs, J = _al_value_grad(problem, candidate, mu, rho)
            if not np.all(np.isfinite(g)):
                raise LineSearchError("non-finite gradient in line search",
                                      trace=list(trace))
            return candidate, val, g, cs, J, step
        step *= 0.5
    return None


def _newton_direction(problem, grad, cs, J, mu, rho):
    """Damped Gauss-Newton step on the AL subproblem.

    The loss Hessian is exact (the objective is quadratic in alpha); the
    active constraints contribute their Gauss-Newton term rho J'J.  Dropping
    the second-order constraint curvature keeps the model PSD, and the line
    search guarantees descent regardless.
    """
    active = (mu / rho + cs) > 0
    H = 2.0 * problem.loss_term.Hfull
    if np.any(active):
        Ja = J[active]
        H = H + rho * (Ja.T @ Ja)
    damping = 1e-10 * max(1.0, float(np.max(np.diag(H))))
    H = H + damping * np.eye(len(H))
    try:
        direction = np.linalg.solve(H, -grad)
    except np.linalg.LinAlgError:
        return -grad
    if direction @ grad >= 0:
        return -grad
    return direction


def _minimize_inner(problem, alpha, mu, rho, config, trace):
    """Minimize the AL subproblem; deterministic Newton, L-BFGS or descent."""
    value, grad, cs, J = _al_value_grad(problem, alpha, mu, rho)
    if not np.isfinite(value):
        raise LineSearchError("non-finite merit at inner start", trace=list(trace))
    mem_s, mem_y = [], []
    iterations = 0
    for it in range(config.max_inner_iters):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= 1e-10 * max(1.0, abs(value)):
            break
        if config.inner_solver == "newton":
            direction = _newton_direction(problem, grad, cs, J, mu, rho)
        elif config.inner_solver == "lbfgs" and mem_s:
            q = grad.copy()
            coeffs = []
            for s, y in zip(reversed(mem_s), reversed(mem_y)):
                a = (s @ q) / (y @ s)
                coeffs.append(a)
                q -= a * y
            q *= (mem_s[-1] @ mem_y[-1]) / (mem_y[-1] @ mem_y[-1])
            for (s, y), a in zip(zip(mem_s, mem_y), reversed(coeffs)):
                q += (a - (y @ q) / (y @ s)) * s
            direction = -q
            if direction @ grad > 0:
                direction = -grad
        else:
            direction = -grad
        result = _armijo(problem, alpha, direction, value, grad, mu, rho, trace)
        if result is None:
            break
        candidate, val, g, cs, J, _ = result
        if config.inner_solver == "lbfgs":
            s = candidate - alpha
            y = g - grad
            if s @ y > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
                mem_s.append(s)
                mem_y.append(y)
                if len(mem_s) > 10:
                    mem_s.pop(0)
                    mem_y.pop(0)
        converged = (abs(value - val) <= 1e-14 * max(1.0, abs(value))
                     and np.linalg.norm(candidate - alpha) <= 1e-12 * (1 + np.linalg.norm(alpha)))
        alpha, value, grad = candidate, val, g
        iterations = it + 1
        if converged:
            break
    return alpha, value, cs, iterations


def solve(data, system, grid, config, kernel):
    """Solve the discretized Lyapunov-constrained regression.

    Returns a LearnedModel whose centers are exactly the demonstration states
    followed by the grid points.  In ``lipschitz_mode='estimated'`` the
    tightening is re-derived from the current iterate and the problem
    re-solved until the estimate stabilizes within 10%.
    """
    from .model_io import LearnedModel

    problem = LearnerProblem(data, system, grid, config, kernel)
    if config.lipschitz_mode == "fixed":
        problem.tightening = config.margin
        alpha, meta = _solve_al(problem, np.zeros(problem.n_weights), config)
        lipschitz_used = None
    else:
        problem.tightening = config.margin
        alpha = np.zeros(problem.n_weights)
        estimate = None
        pm = config.perturbation(system)
        for round_idx in range(config.lipschitz_rounds):
            alpha, meta = _solve_al(problem, alpha, config)
            new_estimate = estimate_lipschitz(
                problem.policy(alpha), grid, pm,
                mc_samples=problem.mc_samples_used,
                safety_factor=config.safety_factor,
                seed=derived_seed(config.rng_seed, "lipschitz-fd"))
            meta["lipschitz_rounds_run"] = round_idx + 1
            stable = (estimate is not None
                      and abs(new_estimate - estimate) <= 0.1 * abs(estimate))
            estimate = new_estimate
            if stable or round_idx + 1 == config.lipschitz_rounds:
                # keep the tightening the returned alpha was solved with
                break
            problem.tightening = estimate * grid.grid_constant
        lipschitz_used = estimate

    grid.tightening = problem.tightening
    meta["tightening"] = problem.tightening
    meta["lipschitz_used"] = lipschitz_used
    meta["lambda"] = problem.lam
    meta["constraint_noise_seed"] = problem.constraint_noise_seed
    meta["mc_samples_used"] = problem.mc_samples_used
    meta["rng_seed"] = config.rng_seed

    V = problem.value_function(alpha)
    return LearnedModel(V=V, beta=config.beta, grid=grid,
                        n_data_states=problem.n_data_states,
                        config_echo=config.echo(), training_meta=meta)


def _solve_al(problem, alpha0, config):
    """Outer multiplier/penalty loop around the inner minimizer."""
    n_constraints = len(problem.grid.points) + len(problem.noneq)
    mu = np.zeros(n_constraints)
    rho = float(config.penalty_init)
    alpha = np.asarray(alpha0, dtype=float).copy()
    loss_trace, violation_trace, merit_trace = [], [], []
    checksums = []
    prev_violation = None
    prev_loss = None
    converged = False
    trace = []

    for outer in range(config.max_outer_iters):
        merit_start = _al_value(problem, alpha, mu, rho)[0]
        alpha, merit_end, cs, inner_iters = _minimize_inner(
            problem, alpha, mu, rho, config, trace)
        violation = float(np.maximum(cs, 0.0).max()) if len(cs) else 0.0
        current_loss = problem.loss(alpha)
        loss_trace.append(current_loss)
        violation_trace.append(violation)
        merit_trace.append([merit_start, merit_end])
        checksums.append(hashlib.sha256(alpha.tobytes()).hexdigest()[:16])
        trace.append({"outer": outer, "loss": current_loss,
                      "violation": violation, "rho": rho, "inner_iters": inner_iters})

        loss_settled = (prev_loss is not None and
                        abs(current_loss - prev_loss) <= config.tolerance * max(1.0, abs(prev_loss)))
        if violation < config.tolerance and loss_settled:
            converged = True
            break
        if violation < config.tolerance and outer + 1 == config.max_outer_iters:
            converged = True
            break
        mu = np.maximum(0.0, mu + rho * cs)
        insufficient_progress = (prev_violation is not None
                                 and violation > 0.25 * prev_violation)
        # once feasible, growing rho accelerates the decay of multipliers on
        # inactive constraints (the remaining source of loss bias)
        if insufficient_progress or violation < config.tolerance:
            rho = min(rho * config.penalty_growth, 1e10)
        prev_violation = violation
        prev_loss = current_loss
    else:
        converged = violation_trace and violation_trace[-1] < config.tolerance

    if not converged and violation_trace and violation_trace[-1] >= config.tolerance:
        cs, _ = problem.constraints_and_jac(alpha)
        worst = int(np.argmax(cs))
        point = problem.constraint_point(worst)
        raise InfeasibilityError(
            f"constraint violation {violation_trace[-1]:.3e} not reduced below "
            f"{config.tolerance:.1e} after {config.max_outer_iters} outer iterations "
            f"(worst at grid point {point})",
            worst_point=point, worst_violation=float(cs[worst]))

    meta = {
        "loss_trace": loss_trace,
        "violation_trace": violation_trace,
        "merit_trace": merit_trace,
        "alpha_checksums": checksums,
        "outer_iterations": len(loss_trace),
    }
    return alpha, meta
