"""Input validation helpers used across the estimator-facing API."""

import numpy as np

from .errors import NumericalDomainError


def as_state(x, dim=None):
    """Coerce ``x`` to a 1-D float vector, optionally checking its length."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D state vector, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise ValueError(f"expected a state of dimension {dim}, got {x.shape[0]}")
    return x


def as_state_batch(X, dim=None):
    """Coerce ``X`` to a 2-D (n_points, dim) float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D array of states, got shape {X.shape}")
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"expected states of dimension {dim}, got {X.shape[1]}")
    return X


def check_finite(arr, what="value", context=None):
    """Raise NumericalDomainError when ``arr`` contains NaN or inf."""
    arr = np.asarray(arr)
    if not np.all(np.isfinite(arr)):
        suffix = f" at {np.asarray(context)}" if context is not None else ""
        raise NumericalDomainError(f"non-finite {what}{suffix}")
    return arr


def check_bounds_box(lower, upper):
    """Validate an axis-aligned box; returns (lower, upper) as float arrays."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape or lower.ndim != 1:
        raise ValueError("bounds must be two 1-D arrays of equal length")
    if not np.all(lower < upper):
        raise ValueError(f"degenerate bounds: lower={lower} upper={upper}")
    return lower, upper


def check_positive(value, name):
    if not np.isscalar(value) or not value > 0:
        raise ValueError(f"{name} must be a positive scalar, got {value!r}")
    return float(value)
