"""Training loops: backbone + final head first, then the frozen-backbone exit head.

All loops are deterministic for a fixed TrainHyper.rng_seed: shuffling,
augmentation, and initialization each draw from their own named seed stream.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingDivergedError
from .model import AmcModel, ArchConfig
from .nnet.layers import softmax
from .nnet.losses import EPS
from .nnet.optim import make_optimizer
from .signals import STREAM_AUGMENT, STREAM_INIT, STREAM_SHUFFLE, augment_batch


@dataclass
class TrainHyper:
    """Optimizer and schedule settings for one training run."""

    learning_rate: float = 1e-3
    epochs: int = 25
    batch_size: int = 64
    optimizer: str = "adam"
    dropout_rate: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs <= 0:
            raise ValueError("epochs must be positive")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be 'sgd' or 'adam'")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_metric: float


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)

    def append(self, epoch, train_loss, val_metric):
        self.epochs.append(EpochLog(epoch, float(train_loss), float(val_metric)))

    @property
    def final_val_metric(self):
        return self.epochs[-1].val_metric if self.epochs else float("nan")


def param_checksums(model: AmcModel, names=None) -> dict:
    """CRC32 of each parameter buffer; used to assert freeze integrity."""
    params = model.parameters()
    if names is None:
        names = params.keys()
    return {name: zlib.crc32(np.ascontiguousarray(params[name]).tobytes()) for name in names}


def _stream(seed, stream_id, *rest):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream_id, *rest)))


def _softmax_ce(logits, y):
    """Mean cross-entropy over the batch plus the gradient w.r.t. the logits."""
    p = softmax(logits.astype(np.float64))
    n = logits.shape[0]
    picked = np.clip(p[np.arange(n), y], EPS, 1.0)
    loss = float(-np.log(picked).mean())
    grad = p
    grad[np.arange(n), y] -= 1.0
    return loss, (grad / n).astype(logits.dtype)


def _accuracy(logits, y):
    return float(np.mean(np.argmax(logits, axis=-1) == y))


def _eval_fe_accuracy(model, x, y, batch_size=256):
    hits = 0
    for lo in range(0, x.shape[0], batch_size):
        pair = model.forward_full(x[lo : lo + batch_size])
        hits += int(np.sum(pair.yhat_f == y[lo : lo + batch_size]))
    return hits / x.shape[0]


def train_backbone_arrays(
    x_train,
    y_train,
    x_val,
    y_val,
    hyper: TrainHyper,
    exit_point: int = 1,
    arch: ArchConfig = None,
    augment: bool = True,
):
    """Train stem, stages, and the final head; the exit head stays at init."""
    rng_init = _stream(hyper.rng_seed, STREAM_INIT)
    model = AmcModel(exit_point, arch, rng=rng_init)
    opt = make_optimizer(hyper.optimizer, hyper.learning_rate)
    trainable = [n for n in model.parameters() if not n.startswith("ee_head.")]
    history = TrainHistory()
    n = x_train.shape[0]
    for epoch in range(hyper.epochs):
        order = _stream(hyper.rng_seed, STREAM_SHUFFLE, epoch).permutation(n)
        rng_aug = _stream(hyper.rng_seed, STREAM_AUGMENT, epoch)
        losses = []
        for lo in range(0, n, hyper.batch_size):
            idx = order[lo : lo + hyper.batch_size]
            xb = x_train[idx]
            if augment:
                xb = augment_batch(xb, rng_aug)
            logits = model.forward_train(xb)
            loss, grad = _softmax_ce(logits, y_train[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss {loss} at epoch {epoch}")
            model.backward_train(grad)
            params = model.parameters()
            grads = model.gradients()
            opt.step({k: params[k] for k in trainable}, {k: grads[k] for k in trainable})
            model.touch()
            losses.append(loss)
        val_acc = _eval_fe_accuracy(model, x_val, y_val)
        history.append(epoch, np.mean(losses), val_acc)
    return model, history


def train_backbone(dataset, hyper: TrainHyper, exit_point: int = 1, arch: ArchConfig = None, augment: bool = True):
    x_tr, y_tr, _ = dataset.arrays_for("train")
    x_va, y_va, _ = dataset.arrays_for("val")
    return train_backbone_arrays(x_tr, y_tr, x_va, y_va, hyper, exit_point, arch, augment)


def train_exit_branch_arrays(model: AmcModel, x_train, y_train, x_val, y_val, hyper: TrainHyper):
    """Train only the exit head on frozen pooled features; verify the freeze."""
    frozen_names = [n for n in model.parameters() if not n.startswith("ee_head.")]
    before = param_checksums(model, frozen_names)

    feats_tr = _batched_prefix(model, x_train)
    feats_va = _batched_prefix(model, x_val)
    head = model.ee_head
    opt = make_optimizer(hyper.optimizer, hyper.learning_rate)
    history = TrainHistory()
    n = feats_tr.shape[0]
    for epoch in range(hyper.epochs):
        order = _stream(hyper.rng_seed, STREAM_SHUFFLE, epoch).permutation(n)
        losses = []
        for lo in range(0, n, hyper.batch_size):
            idx = order[lo : lo + hyper.batch_size]
            logits = head.forward(feats_tr[idx])
            loss, grad = _softmax_ce(logits, y_train[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss {loss} at epoch {epoch}")
            head.backward(grad)
            opt.step(
                {"ee_head.weight": head.weight, "ee_head.bias": head.bias},
                {"ee_head.weight": head.grad_weight, "ee_head.bias": head.grad_bias},
            )
            model.touch()
            losses.append(loss)
        history.append(epoch, np.mean(losses), _accuracy(head.forward(feats_va), y_val))

    after = param_checksums(model, frozen_names)
    drifted = [n for n in frozen_names if before[n] != after[n]]
    if drifted:
        raise AssertionError(f"frozen parameters changed during exit training: {drifted}")
    return history


def train_exit_branch(model: AmcModel, dataset, hyper: TrainHyper):
    x_tr, y_tr, _ = dataset.arrays_for("train")
    x_va, y_va, _ = dataset.arrays_for("val")
    return train_exit_branch_arrays(model, x_tr, y_tr, x_va, y_va, hyper)


def _batched_prefix(model, x, batch_size=256):
    chunks = [model.prefix_features(x[lo : lo + batch_size]) for lo in range(0, x.shape[0], batch_size)]
    return np.concatenate(chunks, axis=0)
