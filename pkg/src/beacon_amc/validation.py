"""Input validation helpers for the estimator-facing API."""

from __future__ import annotations

import numpy as np

from .signals import FRAME_LEN, NUM_CLASSES


def check_frames(X) -> np.ndarray:
    """Coerce to a finite float32 (n, 2, 128) batch; a single frame gets a batch axis."""
    X = np.asarray(X, dtype=np.float32)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[1:] != (2, FRAME_LEN):
        raise ValueError(f"expected frames of shape (n, 2, {FRAME_LEN}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("frames must be finite")
    return X


def check_labels(y, n, n_classes: int = NUM_CLASSES) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    y = y.astype(np.int64)
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError(f"labels must lie in [0, {n_classes})")
    return y


def check_prob_matrix(P, n_classes: int = NUM_CLASSES, atol: float = 1e-5) -> np.ndarray:
    """Validate (n, C) rows as probability vectors on the simplex."""
    P = np.asarray(P, dtype=np.float64)
    if P.ndim == 1:
        P = P[None]
    if P.ndim != 2 or P.shape[1] != n_classes:
        raise ValueError(f"expected probability rows of width {n_classes}, got {P.shape}")
    if not np.all(np.isfinite(P)) or P.min() < -atol:
        raise ValueError("probabilities must be finite and nonnegative")
    if not np.allclose(P.sum(axis=1), 1.0, atol=atol):
        raise ValueError("probability rows must sum to 1")
    return P


def check_binary_labels(y, n) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    y = y.astype(np.int64)
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return y
