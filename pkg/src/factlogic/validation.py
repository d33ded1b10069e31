"""Input validation helpers for the estimator-facing API."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def check_truth_matrix(X, *, name: str = "X") -> np.ndarray:
    """Coerce to a 2-d float64 matrix of truth values in [-1, 1]."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ShapeError(f"{name} must be 2-dimensional, got ndim={X.ndim}")
    if X.size and not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    if X.size and np.any(np.abs(X) > 1.0 + 1e-12):
        raise ValueError(f"{name} entries must lie in [-1, 1]")
    return X


def check_consistent_length(X: np.ndarray, y: np.ndarray) -> None:
    if X.shape[0] != np.asarray(y).shape[0]:
        raise ShapeError(f"X and y disagree in length: {X.shape[0]} vs {np.asarray(y).shape[0]}")


def check_group_sizes(group_sizes, n_features: int) -> tuple[int, ...]:
    """Validate predicate group sizes against the feature count.

    ``None`` means every feature is its own single-atom predicate.
    """
    if group_sizes is None:
        return (1,) * n_features
    group_sizes = tuple(int(g) for g in group_sizes)
    if any(g < 1 for g in group_sizes):
        raise ValueError("group sizes must be >= 1")
    if sum(group_sizes) != n_features:
        raise ShapeError(
            f"group sizes sum to {sum(group_sizes)} but X has {n_features} features"
        )
    return group_sizes
