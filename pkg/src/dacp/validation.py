"""Input validation helpers for the estimator-facing API."""

import numpy as np


def check_image_batch(X, name="X"):
    """Coerce to a float64 NHWC batch; (n, h, w) gets a channel axis."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 3:
        X = X[..., None]
    if X.ndim != 4:
        raise ValueError(f"{name} must be (n_samples, h, w, c) or (n_samples, "
                         f"h, w), got shape {X.shape}")
    if X.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if not np.isfinite(X).all():
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(X)


def check_labels(y, n_samples, name="y"):
    """Flatten labels and encode them against their sorted unique values."""
    y = np.asarray(y).ravel()
    if y.shape[0] != n_samples:
        raise ValueError(f"{name} has {y.shape[0]} entries for {n_samples} samples")
    classes, encoded = np.unique(y, return_inverse=True)
    if classes.shape[0] < 2:
        raise ValueError(f"{name} must contain at least 2 classes, got "
                         f"{classes.shape[0]}")
    return classes, encoded.astype(np.int64)
