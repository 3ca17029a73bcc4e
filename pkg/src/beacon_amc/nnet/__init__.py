"""Minimal deterministic neural-network engine (numpy arrays, explicit backward passes)."""

from .layers import Conv1d, Dense, Dropout, he_init, relu, sigmoid, softmax
from .losses import EPS, bce, cross_entropy
from .optim import SGD, Adam, make_optimizer
from .gradcheck import GradcheckReport, gradcheck, gradcheck_conv1d, gradcheck_dense
from .checkpoint import load_params, save_params

__all__ = [
    "Conv1d",
    "Dense",
    "Dropout",
    "he_init",
    "relu",
    "sigmoid",
    "softmax",
    "EPS",
    "bce",
    "cross_entropy",
    "SGD",
    "Adam",
    "make_optimizer",
    "GradcheckReport",
    "gradcheck",
    "gradcheck_dense",
    "gradcheck_conv1d",
    "load_params",
    "save_params",
]
