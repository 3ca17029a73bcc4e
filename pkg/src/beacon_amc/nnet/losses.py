"""Classification losses. Probabilities are clamped to [EPS, 1-EPS] before logs."""

import numpy as np

EPS = 1e-7


def cross_entropy(p, y):
    """Negative log-likelihood of class y under probability vector(s) p.

    Accepts a single (C,) vector with an int label, or an (n, C) batch with
    (n,) labels; returns a scalar or an (n,) array accordingly.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        return -np.log(np.clip(p[int(y)], EPS, 1.0 - EPS))
    y = np.asarray(y, dtype=int)
    picked = p[np.arange(p.shape[0]), y]
    return -np.log(np.clip(picked, EPS, 1.0 - EPS))


def bce(s, label):
    """Binary cross-entropy of sigmoid output(s) s against 0/1 label(s)."""
    s = np.clip(np.asarray(s, dtype=float), EPS, 1.0 - EPS)
    label = np.asarray(label, dtype=float)
    out = -label * np.log(s) - (1.0 - label) * np.log(1.0 - s)
    if out.ndim == 0:
        return float(out)
    return out
