"""Input validation shared by the estimator layer and the CLI."""

from __future__ import annotations

import numpy as np

from .channel import ChannelPmf
from .params import GridSpec, SystemParams


def check_system(params) -> SystemParams:
    if not isinstance(params, SystemParams):
        raise TypeError(f"expected SystemParams, got {type(params).__name__}")
    return params


def check_grid(grid) -> GridSpec:
    if not isinstance(grid, GridSpec):
        raise TypeError(f"expected GridSpec, got {type(grid).__name__}")
    return grid


def check_pmf(pmf) -> ChannelPmf:
    if not isinstance(pmf, ChannelPmf):
        raise TypeError(f"expected ChannelPmf, got {type(pmf).__name__}")
    # ChannelPmf validates itself on construction; re-check the invariants
    # in case arrays were mutated in place.
    if abs(float(np.sum(pmf.prob)) - 1.0) > 1e-12:
        raise ValueError("pmf probabilities no longer sum to 1")
    return pmf


def check_alpha(alpha) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


def check_states(X, n1: int, n2: int, n_out: int) -> np.ndarray:
    """Validate an (n, 3) array of (b1, b2, outcome) query rows."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != 3:
        raise ValueError("expected an (n, 3) array of (b1, b2, outcome) rows")
    if np.any(X != np.floor(X)):
        raise ValueError("state rows must be integers")
    X = X.astype(np.int64)
    if (np.any(X < 0) or np.any(X[:, 0] >= n1) or np.any(X[:, 1] >= n2)
            or np.any(X[:, 2] >= n_out)):
        raise ValueError("state row out of range for this grid/pmf")
    return X
