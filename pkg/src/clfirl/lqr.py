"""Ground truth for the linear-quadratic experiment.

Solves the discrete algebraic Riccati equation by fixed-point iteration
(desk-scale problems; simplicity over asymptotic speed), yielding the optimal
gain K and the quadratic optimal value V*(x) = x' P x used to judge the
learned CLF.
"""

from dataclasses import dataclass

import numpy as np

from .systems import Trajectory
from .validation import as_state, as_state_batch


@dataclass(frozen=True)
class LqrProblem:
    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("A", "B", "Q", "R"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n, m = self.B.shape
        if self.A.shape != (n, n) or self.Q.shape != (n, n) or self.R.shape != (m, m):
            raise ValueError("inconsistent LQR matrix dimensions")
        if not np.allclose(self.R, self.R.T) or np.linalg.eigvalsh(self.R).min() <= 0:
            raise ValueError("R must be symmetric positive definite")
        if not np.allclose(self.Q, self.Q.T) or np.linalg.eigvalsh(self.Q).min() < -1e-12:
            raise ValueError("Q must be symmetric positive semidefinite")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")


def benchmark_lqr_problem():
    return LqrProblem(A=[[1.0, 0.1], [0.0, 0.9]], B=np.eye(2),
                      Q=np.diag([1.0, 0.5]), R=15.0 * np.eye(2))


def solve_dare(problem, tol=1e-12, max_iters=100_000):
    """Fixed point of P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA, from P = Q.

    A discount gamma < 1 enters through the scaled iteration with
    sqrt(gamma) A and sqrt(gamma) B.  Returns (P, K) with u = -K x optimal.
    Raises on divergence or a closed loop that is not a contraction.
    """
    sg = np.sqrt(problem.gamma)
    A, B, Q, R = sg * problem.A, sg * problem.B, problem.Q, problem.R
    P = Q.copy()
    for _ in range(max_iters):
        BtP = B.T @ P
        Pn = Q + A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(R + BtP @ B, BtP @ A)
        delta = np.max(np.abs(Pn - P))
        P = Pn
        if not np.isfinite(delta) or np.max(np.abs(P)) > 1e12:
            raise ValueError(
                "Riccati iteration diverged; system not stabilizable "
                f"(spectral radius of A: {max(abs(np.linalg.eigvals(problem.A))):.4f})")
        if delta < tol:
            break
    else:
        raise ValueError(
            "Riccati iteration did not converge within "
            f"{max_iters} iterations (last delta {delta:.3e})")
    # with the sqrt(gamma)-scaled matrices this solve equals the discounted
    # gain gamma (R + gamma B'PB)^-1 B'PA directly
    K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    rho = max(abs(np.linalg.eigvals(problem.A - problem.B @ K)))
    if problem.gamma == 1.0 and rho >= 1.0:
        raise ValueError(f"closed loop not stable: spectral radius {rho:.4f} >= 1")
    return P, K


def dare_residual(problem, P):
    """inf-norm of the DARE residual at P (substitution check)."""
    sg = np.sqrt(problem.gamma)
    A, B, Q, R = sg * problem.A, sg * problem.B, problem.Q, problem.R
    BtP = B.T @ P
    res = A.T @ P @ A - P - A.T @ P @ B @ np.linalg.solve(R + BtP @ B, BtP @ A) + Q
    return float(np.max(np.abs(res)))


class QuadraticValue:
    """V(x) = x' P x with grad V(x) = (P + P') x; plugs into ClfPolicy."""

    def __init__(self, P):
        P = np.asarray(P, dtype=float)
        if not np.allclose(P, P.T, atol=1e-10):
            raise ValueError("P must be symmetric")
        self.P = P
        self._PT = P + P.T

    def eval(self, x):
        x = as_state(x, len(self.P))
        return float(x @ self.P @ x)

    def eval_batch(self, X):
        X = as_state_batch(X, len(self.P))
        return np.einsum("qi,ij,qj->q", X, self.P, X)

    def grad(self, x):
        x = as_state(x, len(self.P))
        return self._PT @ x

    def grad_batch(self, X):
        return as_state_batch(X, len(self.P)) @ self._PT.T


def generate_demonstrations(problem, K, lower, upper, n_points, rng):
    """One-step demonstrations of the optimal feedback u = -K x.

    Start states are sampled uniformly inside the box; each demonstration is
    the length-1 trajectory (x, A x - B K x) with its applied action.
    """
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    starts = rng.uniform(np.asarray(lower, float), np.asarray(upper, float),
                         size=(n_points, problem.A.shape[0]))
    demos = []
    for i, x in enumerate(starts):
        u = -K @ x
        nxt = problem.A @ x + problem.B @ u
        demos.append(Trajectory(states=np.array([x, nxt]), actions=np.array([u]),
                                traj_id=f"lqr-demo-{i:03d}"))
    return demos
