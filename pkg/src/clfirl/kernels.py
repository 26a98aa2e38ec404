"""Squared-exponential kernel and RKHS-represented scalar functions.

A candidate function is represented as V(x) = sum_i alpha_i k(z_i, x) over a
fixed set of centers z_i.  The policy and the learner need the first and
second spatial derivatives of V, so the kernel exposes analytic derivatives
with respect to its evaluation argument:

    k(z, x)        = s2 * exp(-sum_d (x_d - z_d)^2 / (2 l_d^2))
    dk/dx          = k(z, x) * (z - x) / l^2                (element-wise l^2)
    d2k/dx2 . v    = k(z, x) * (w (w.v) - v / l^2),  w = (z - x) / l^2
"""

import numpy as np

from .validation import as_state, as_state_batch, check_finite

DEFAULT_FAMILY = "squared-exponential"


def default_lengthscale(lower, upper):
    """Default kernel lengthscale: 20% of the largest box side."""
    return 0.2 * float(np.max(np.asarray(upper) - np.asarray(lower)))


class SquaredExponentialKernel:
    """Stationary SE kernel with scalar or per-dimension lengthscale."""

    family = DEFAULT_FAMILY

    def __init__(self, lengthscale=1.0, signal_variance=1.0):
        lengthscale = np.asarray(lengthscale, dtype=float)
        if np.any(lengthscale <= 0):
            raise ValueError("lengthscale must be positive")
        if signal_variance <= 0:
            raise ValueError("signal_variance must be positive")
        self.lengthscale = lengthscale
        self.signal_variance = float(signal_variance)

    def _inv_ls_sq(self, dim):
        ls = np.broadcast_to(self.lengthscale, (dim,))
        return 1.0 / ls**2

    def pairwise(self, X, Z):
        """Gram block k(X_i, Z_j), shape (len(X), len(Z))."""
        X = as_state_batch(X)
        Z = as_state_batch(Z, dim=X.shape[1])
        inv = self._inv_ls_sq(X.shape[1])
        d2 = ((X[:, None, :] - Z[None, :, :]) ** 2 * inv).sum(-1)
        return self.signal_variance * np.exp(-0.5 * d2)

    def grad_x(self, X, Z):
        """d k(X_i, Z_j) / d X_i, shape (len(X), len(Z), dim)."""
        X = as_state_batch(X)
        Z = as_state_batch(Z, dim=X.shape[1])
        inv = self._inv_ls_sq(X.shape[1])
        K = self.pairwise(X, Z)
        return K[:, :, None] * (Z[None, :, :] - X[:, None, :]) * inv

    def pairwise_and_grad(self, X, Z):
        """Fused Gram block and its derivative (saves one exp pass)."""
        X = as_state_batch(X)
        Z = as_state_batch(Z, dim=X.shape[1])
        inv = self._inv_ls_sq(X.shape[1])
        diff = Z[None, :, :] - X[:, None, :]
        K = self.signal_variance * np.exp(-0.5 * (diff**2 * inv).sum(-1))
        return K, K[:, :, None] * diff * inv

    def gram(self, X):
        return self.pairwise(X, X)

    def to_dict(self):
        ls = np.atleast_1d(self.lengthscale)
        return {
            "family": self.family,
            "lengthscale": [float(v) for v in ls],
            "signal_variance": self.signal_variance,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("family", DEFAULT_FAMILY) != DEFAULT_FAMILY:
            raise ValueError(f"unsupported kernel family {d.get('family')!r}")
        ls = np.asarray(d["lengthscale"], dtype=float)
        if ls.size == 1:
            ls = float(ls[0])
        return cls(lengthscale=ls, signal_variance=d["signal_variance"])

    def __repr__(self):
        return (f"SquaredExponentialKernel(lengthscale={self.lengthscale!r}, "
                f"signal_variance={self.signal_variance!r})")


def kernel_from_dict(d):
    return SquaredExponentialKernel.from_dict(d)


class RkhsFunction:
    """V(x) = sum_i alpha_i k(z_i, x); immutable once constructed."""

    def __init__(self, centers, weights, kernel):
        centers = as_state_batch(np.array(centers, dtype=float))
        weights = np.array(weights, dtype=float).ravel()
        if len(weights) != len(centers):
            raise ValueError("weights and centers must have equal length")
        check_finite(centers, "center")
        self.centers = centers
        self.weights = weights
        self.kernel = kernel
        self.centers.setflags(write=False)
        self.weights.setflags(write=False)
        self._gram = None

    @property
    def dim(self):
        return self.centers.shape[1]

    def eval(self, x):
        x = as_state(x, self.dim)
        check_finite(x, "input state", x)
        return float(self.kernel.pairwise(x[None, :], self.centers)[0] @ self.weights)

    def eval_batch(self, X):
        X = as_state_batch(X, self.dim)
        return self.kernel.pairwise(X, self.centers) @ self.weights

    def grad(self, x):
        x = as_state(x, self.dim)
        return self.kernel.grad_x(x[None, :], self.centers)[0].T @ self.weights

    def grad_batch(self, X):
        X = as_state_batch(X, self.dim)
        dK = self.kernel.grad_x(X, self.centers)
        return np.einsum("qcn,c->qn", dK, self.weights)

    def hessian_vector(self, x, v):
        """(d2V/dx2) v, computed analytically."""
        x = as_state(x, self.dim)
        v = as_state(v, self.dim)
        inv = self.kernel._inv_ls_sq(self.dim)
        K = self.kernel.pairwise(x[None, :], self.centers)[0]
        W = (self.centers - x[None, :]) * inv
        wv = W @ v
        hv = (self.weights * K) @ (W * wv[:, None]) - ((self.weights * K).sum() * inv) * v
        return hv

    def rkhs_norm_sq(self):
        """alpha' K alpha over the center Gram matrix (cached)."""
        if self._gram is None:
            self._gram = self.kernel.gram(self.centers)
        val = float(self.weights @ self._gram @ self.weights)
        if val < -1e-9:
            raise ValueError(f"Gram matrix numerically not PSD: alpha'K alpha = {val}")
        return val

    def with_weights(self, weights):
        """Same centers and kernel, new weight vector."""
        out = RkhsFunction(self.centers, weights, self.kernel)
        out._gram = self._gram
        return out

    def to_dict(self):
        return {
            "kernel": self.kernel.to_dict(),
            "centers": [[float(v) for v in row] for row in self.centers],
            "weights": [float(v) for v in self.weights],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["centers"], d["weights"], kernel_from_dict(d["kernel"]))
