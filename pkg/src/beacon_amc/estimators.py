"""Scikit-learn style estimator wrappers around the core training loops."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .lbap import train_lbap
from .model import ArchConfig
from .signals import NUM_CLASSES, STREAM_HOLDOUT
from .training import TrainHyper, train_backbone_arrays, train_exit_branch_arrays
from .validation import check_binary_labels, check_frames, check_labels, check_prob_matrix


def _holdout_split(n, val_fraction, seed):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAM_HOLDOUT,)))
    perm = rng.permutation(n)
    n_val = max(1, round(val_fraction * n))
    return perm[n_val:], perm[:n_val]


class EarlyExitClassifier(ClassifierMixin, BaseEstimator):
    """Early-exit modulation classifier with a trainable exit head.

    fit() trains the shared backbone and final head on an internal holdout
    split, freezes them, then trains the exit head attached after
    ``exit_point`` stages. predict/predict_proba use the final head;
    exit_proba exposes the early head for criterion scoring.

    Parameters
    ----------
    exit_point : int, 1, 2 or 3
        Stage after which the exit head is attached.
    epochs, exit_epochs : int
        Backbone and exit-head training epochs.
    learning_rate, batch_size, optimizer : float, int, str
        Shared optimizer settings for both phases.
    augment : bool
        Apply random scale/rotation/shift to backbone training batches.
    val_fraction : float
        Fraction of fit() data held out for per-epoch validation metrics.
    random_state : int
        Base seed for initialization, shuffling, and augmentation streams.
    """

    def __init__(
        self,
        exit_point=1,
        epochs=25,
        exit_epochs=60,
        learning_rate=1e-3,
        batch_size=64,
        optimizer="adam",
        augment=True,
        val_fraction=0.1,
        random_state=0,
    ):
        self.exit_point = exit_point
        self.epochs = epochs
        self.exit_epochs = exit_epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.optimizer = optimizer
        self.augment = augment
        self.val_fraction = val_fraction
        self.random_state = random_state

    def fit(self, X, y):
        X = check_frames(X)
        y = check_labels(y, X.shape[0])
        tr, va = _holdout_split(X.shape[0], self.val_fraction, self.random_state)
        hyper = TrainHyper(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            optimizer=self.optimizer,
            rng_seed=self.random_state,
        )
        self.model_, self.history_ = train_backbone_arrays(
            X[tr], y[tr], X[va], y[va], hyper, exit_point=self.exit_point, arch=ArchConfig(), augment=self.augment
        )
        exit_hyper = TrainHyper(
            learning_rate=self.learning_rate,
            epochs=self.exit_epochs,
            batch_size=self.batch_size,
            optimizer=self.optimizer,
            rng_seed=self.random_state + 1,
        )
        self.exit_history_ = train_exit_branch_arrays(self.model_, X[tr], y[tr], X[va], y[va], exit_hyper)
        self.cost_profile_ = self.model_.count_macs()
        self.classes_ = np.arange(NUM_CLASSES)
        return self

    def predict_proba(self, X):
        X = check_frames(X)
        return self.model_.forward_full(X).p_f

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=-1)

    def exit_proba(self, X):
        X = check_frames(X)
        pair, _ = self.model_.forward_to_exit(X)
        return pair.p_e

    def predict_exit(self, X):
        return np.argmax(self.exit_proba(X), axis=-1)


class RecoverabilityPredictor(ClassifierMixin, BaseEstimator):
    """Binary predictor of whether forwarding a sample fixes the early error.

    fit() takes exit-head probability rows and 0/1 recoverability labels,
    holds out a validation slice for early stopping, and trains the compact
    sigmoid network. score_samples() returns the raw benefit score.
    """

    def __init__(
        self,
        learning_rate=1e-3,
        batch_size=256,
        max_epochs=200,
        patience=10,
        dropout_rate=0.2,
        val_fraction=0.1,
        random_state=0,
    ):
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.dropout_rate = dropout_rate
        self.val_fraction = val_fraction
        self.random_state = random_state

    def fit(self, X, y):
        X = check_prob_matrix(X)
        y = check_binary_labels(y, X.shape[0])
        tr, va = _holdout_split(X.shape[0], self.val_fraction, self.random_state)
        self.net_, self.history_ = train_lbap(
            X[tr],
            y[tr],
            X[va],
            y[va],
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            dropout_rate=self.dropout_rate,
            rng_seed=self.random_state,
        )
        self.classes_ = np.array([0, 1])
        return self

    def score_samples(self, X):
        X = check_prob_matrix(X)
        return self.net_.forward(X)

    def predict_proba(self, X):
        s = self.score_samples(X)
        return np.column_stack([1.0 - s, s])

    def predict(self, X):
        return (self.score_samples(X) >= 0.5).astype(np.int64)
