"""Lightweight benefit-aware predictor (LBAP).

A 10->64->32->1 sigmoid network that maps an exit-head probability vector to
the estimated probability that forwarding the sample would turn a wrong early
prediction into a correct final one. Includes recoverability labeling, the
post-hoc training loop, exact overhead accounting, and calibration reporting.
"""

from __future__ import annotations

import warnings
import zlib
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import TrainingDivergedError
from .nnet.layers import Dense, Dropout, relu, sigmoid
from .nnet.losses import bce
from .nnet.optim import make_optimizer
from .signals import NUM_CLASSES, STREAM_DROPOUT, STREAM_INIT, STREAM_SHUFFLE

LBAP_HIDDEN = (64, 32)
LBAP_MACS_CANONICAL = 2720
LBAP_PARAMS_CANONICAL = 2817


def recoverability_label(yhat_e, yhat_f, y):
    """1 iff the early prediction is wrong and the final one is right."""
    yhat_e = np.asarray(yhat_e)
    out = ((yhat_e != y) & (np.asarray(yhat_f) == y)).astype(np.int8)
    if out.ndim == 0:
        return int(out)
    return out


class LbapOverhead(NamedTuple):
    macs: int
    params: int
    canonical: bool


class CalibrationReport(NamedTuple):
    avg_predicted: float
    true_ratio: float
    abs_gap: float


class LbapNet:
    """dense -> relu -> dropout -> dense -> relu -> dropout -> dense -> sigmoid."""

    def __init__(self, rng=None, dropout_rate=0.2, hidden=LBAP_HIDDEN, in_dim=NUM_CLASSES, dtype=np.float32):
        h1, h2 = hidden
        self.dense1 = Dense(in_dim, h1, rng=rng, dtype=dtype)
        self.dense2 = Dense(h1, h2, rng=rng, dtype=dtype)
        self.dense3 = Dense(h2, 1, rng=rng, dtype=dtype)
        self.drop1 = Dropout(dropout_rate)
        self.drop2 = Dropout(dropout_rate)
        self.dropout_rate = dropout_rate
        self.trained = False
        self._h1 = None
        self._h2 = None

    def parameters(self) -> dict:
        return {
            "lbap.dense1.weight": self.dense1.weight,
            "lbap.dense1.bias": self.dense1.bias,
            "lbap.dense2.weight": self.dense2.weight,
            "lbap.dense2.bias": self.dense2.bias,
            "lbap.dense3.weight": self.dense3.weight,
            "lbap.dense3.bias": self.dense3.bias,
        }

    def gradients(self) -> dict:
        return {
            "lbap.dense1.weight": self.dense1.grad_weight,
            "lbap.dense1.bias": self.dense1.grad_bias,
            "lbap.dense2.weight": self.dense2.grad_weight,
            "lbap.dense2.bias": self.dense2.grad_bias,
            "lbap.dense3.weight": self.dense3.grad_weight,
            "lbap.dense3.bias": self.dense3.grad_bias,
        }

    def forward_logits(self, p, training=False, rng=None):
        p = np.atleast_2d(np.asarray(p))
        h1 = self.dense1.forward(p)
        a1 = relu(h1)
        a1 = self.drop1.forward(a1, rng=rng, training=training)
        h2 = self.dense2.forward(a1)
        a2 = relu(h2)
        a2 = self.drop2.forward(a2, rng=rng, training=training)
        z = self.dense3.forward(a2)[:, 0]
        self._h1 = h1
        self._h2 = h2
        return z

    def backward_from_logits(self, grad_z):
        g = self.dense3.backward(np.asarray(grad_z)[:, None])
        g = self.drop2.backward(g)
        g = g * (self._h2 > 0)
        g = self.dense2.backward(g)
        g = self.drop1.backward(g)
        g = g * (self._h1 > 0)
        self.dense1.backward(g)

    def forward(self, p, training=False, rng=None):
        """Benefit scores in (0, 1); deterministic when training is False."""
        scores = sigmoid(self.forward_logits(p, training=training, rng=rng))
        if np.asarray(p).ndim == 1:
            return float(scores[0])
        return scores

    def checksums(self) -> dict:
        return {n: zlib.crc32(np.ascontiguousarray(a).tobytes()) for n, a in self.parameters().items()}


def lbap_forward(net: LbapNet, p_e, training=False, rng=None):
    return net.forward(p_e, training=training, rng=rng)


def lbap_overhead(net: LbapNet) -> LbapOverhead:
    """Exact (MACs, params) of the predictor; flags non-canonical shapes."""
    macs = 0
    params = 0
    for layer in (net.dense1, net.dense2, net.dense3):
        macs += layer.out_dim * layer.in_dim
        params += layer.out_dim * layer.in_dim + layer.out_dim
    canonical = macs == LBAP_MACS_CANONICAL and params == LBAP_PARAMS_CANONICAL
    return LbapOverhead(macs, params, canonical)


def calibration_report(scores, labels) -> CalibrationReport:
    """Mean predicted recoverability vs. the empirical recoverable fraction."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if scores.size == 0 or scores.shape != labels.shape:
        raise ValueError("scores and labels must be nonempty and aligned")
    avg_predicted = float(scores.mean())
    true_ratio = float(labels.mean())
    return CalibrationReport(avg_predicted, true_ratio, abs(avg_predicted - true_ratio))


def base_rate_bce(labels) -> float:
    """BCE of the constant predictor that always outputs the label base rate."""
    labels = np.asarray(labels, dtype=float)
    return float(np.mean(bce(np.full(labels.shape, labels.mean()), labels)))


@dataclass
class LbapHistory:
    train_bce: list
    val_bce: list
    best_epoch: int

    @property
    def best_val_bce(self) -> float:
        return self.val_bce[self.best_epoch]


def train_lbap(
    train_probs,
    train_labels,
    val_probs,
    val_labels,
    learning_rate: float = 1e-3,
    batch_size: int = 256,
    max_epochs: int = 200,
    patience: int = 10,
    dropout_rate: float = 0.2,
    rng_seed: int = 0,
):
    """Fit the predictor with BCE, early-stopping on validation BCE.

    The best-validation parameters are restored before returning. Degenerate
    label sets (all 0 or all 1) trigger a warning but still train.
    """
    if max_epochs < 1:
        raise ValueError("max_epochs must be positive")
    train_probs = np.asarray(train_probs, dtype=np.float32)
    train_labels = np.asarray(train_labels, dtype=np.float64)
    val_probs = np.asarray(val_probs, dtype=np.float32)
    val_labels = np.asarray(val_labels, dtype=np.float64)
    if train_labels.min() == train_labels.max():
        warnings.warn("degenerate recoverability labels: all samples share one class")

    rng_init = np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(STREAM_INIT,)))
    net = LbapNet(rng=rng_init, dropout_rate=dropout_rate)
    rng_drop = np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(STREAM_DROPOUT,)))
    opt = make_optimizer("adam", learning_rate)

    n = train_probs.shape[0]
    best_val = np.inf
    best_params = None
    best_epoch = 0
    train_log, val_log = [], []
    for epoch in range(max_epochs):
        order = np.random.default_rng(
            np.random.SeedSequence(rng_seed, spawn_key=(STREAM_SHUFFLE, epoch))
        ).permutation(n)
        losses = []
        for lo in range(0, n, batch_size):
            idx = order[lo : lo + batch_size]
            z = net.forward_logits(train_probs[idx], training=True, rng=rng_drop)
            s = sigmoid(z)
            yb = train_labels[idx]
            loss = float(np.mean(bce(s, yb)))
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite LBAP loss at epoch {epoch}")
            grad_z = ((s - yb) / idx.size).astype(np.float32)
            net.backward_from_logits(grad_z)
            opt.step(net.parameters(), net.gradients())
            losses.append(loss)
        val_scores = net.forward(val_probs)
        val_loss = float(np.mean(bce(val_scores, val_labels)))
        train_log.append(float(np.mean(losses)))
        val_log.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in net.parameters().items()}
        elif epoch - best_epoch >= patience:
            break
    for name, arr in net.parameters().items():
        arr[...] = best_params[name]
    net.trained = True
    return net, LbapHistory(train_log, val_log, best_epoch)


def save_lbap(net: LbapNet, path) -> None:
    from .nnet.checkpoint import save_params

    save_params(path, net.parameters())


def load_lbap(path, dropout_rate: float = 0.2) -> LbapNet:
    from .nnet.checkpoint import load_params

    params = load_params(path)
    h1 = params["lbap.dense1.weight"].shape[0]
    h2 = params["lbap.dense2.weight"].shape[0]
    in_dim = params["lbap.dense1.weight"].shape[1]
    net = LbapNet(dropout_rate=dropout_rate, hidden=(h1, h2), in_dim=in_dim)
    for name, arr in net.parameters().items():
        arr[...] = params[name]
    net.trained = True
    return net
