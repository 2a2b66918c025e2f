"""Input validation helpers for the estimator front-end."""

import numpy as np


def check_label_volume(X):
    """Validate and return a 3-d integer label volume (0 = background)."""
    X = np.asarray(X)
    if X.ndim != 3:
        raise ValueError(f"expected a 3-d label volume, got ndim={X.ndim}")
    if not np.issubdtype(X.dtype, np.integer):
        if np.issubdtype(X.dtype, np.bool_):
            return X.astype(np.uint8)
        raise ValueError(f"label volume must be integer-typed, got {X.dtype}")
    if X.size and X.min() < 0:
        raise ValueError("label volume must be non-negative")
    return X


def check_dims(dims):
    dims = tuple(int(d) for d in np.asarray(dims).reshape(-1))
    if len(dims) != 3 or any(d <= 0 for d in dims):
        raise ValueError(f"dims must be three positive extents, got {dims}")
    return dims
