"""Input validation helpers for the public entry points."""

from __future__ import annotations

import numpy as np

from .errors import ContractError

__all__ = ["as_sample_matrix", "check_unit_range", "check_positive_int"]


def as_sample_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce to a finite float64 row matrix."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ContractError(f"{name} must be a 2-D sample matrix, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ContractError(f"{name} must be nonempty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite values")
    return arr


def check_unit_range(X, name: str = "X"):
    arr = np.asarray(X, dtype=np.float64)
    lo, hi = float(arr.min()), float(arr.max())
    if lo < -1.0 or hi > 1.0:
        raise ContractError(
            f"{name} must be normalized into [-1, 1], got range [{lo:.4g}, {hi:.4g}]"
        )


def check_positive_int(value, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise ContractError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
