"""Small input-validation helpers used across the package."""

import numpy as np

from .errors import DomainError, SignalTooShort


def as_float_series(x, name="signal"):
    """Coerce to a contiguous 1-D float64 array, rejecting NaN/Inf."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains NaN or Inf")
    return arr


def as_float_matrix(x, name="X"):
    """Coerce to a 2-D float64 array, rejecting NaN/Inf."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DomainError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains NaN or Inf")
    return arr


def require_min_length(x, n, name="signal"):
    if len(x) < n:
        raise SignalTooShort(f"{name} has {len(x)} samples, needs at least {n}")


def require(condition, exc_type, message):
    if not condition:
        raise exc_type(message)
