"""Exit criteria: scoring functions, percentile thresholds, and the exit rule.

Every score is oriented so that larger means more uncertain / more worth
forwarding; a sample exits early iff its score is strictly below the
threshold. Thresholds are resolved as nearest-rank percentiles of a reference
score sample (the validation split), with -inf/+inf sentinels at 0% and 100%
so those endpoints forward or exit everything exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


class ScoreKind(str, enum.Enum):
    ENTROPY = "entropy"
    MSP = "msp"
    MARGIN = "margin"
    TOP3 = "top3"
    GINI = "gini"
    BEACON = "beacon"


BASELINE_KINDS = (ScoreKind.ENTROPY, ScoreKind.MSP, ScoreKind.MARGIN, ScoreKind.TOP3, ScoreKind.GINI)


class ExitDecision(enum.Enum):
    EXIT = "exit"
    FORWARD = "forward"


@dataclass
class Threshold:
    kind: Optional[ScoreKind]
    percentile: float
    value: float


def score_entropy(p) -> np.ndarray:
    """Normalized Shannon entropy in [0, 1]; zero-probability terms contribute 0."""
    p = np.asarray(p, dtype=float)
    plogp = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return -plogp.sum(axis=-1) / np.log(p.shape[-1])


def score_msp(p) -> np.ndarray:
    """1 minus the maximum probability; range [0, 1 - 1/C]."""
    p = np.asarray(p, dtype=float)
    return 1.0 - p.max(axis=-1)


def score_margin(p) -> np.ndarray:
    """1 minus the gap between the two largest probabilities; range [0, 1]."""
    p = np.asarray(p, dtype=float)
    top2 = np.partition(p, -2, axis=-1)[..., -2:]
    return 1.0 - (top2[..., 1] - top2[..., 0])


def score_top3(p) -> np.ndarray:
    """1 minus the mass of the three largest probabilities; range [0, 1 - 3/C]."""
    p = np.asarray(p, dtype=float)
    top3 = np.partition(p, -3, axis=-1)[..., -3:]
    return 1.0 - top3.sum(axis=-1)


def score_gini(p) -> np.ndarray:
    """1 minus the sum of squared probabilities; range [0, 1 - 1/C]."""
    p = np.asarray(p, dtype=float)
    return 1.0 - (p**2).sum(axis=-1)


def score_beacon(p, lbap) -> np.ndarray:
    """The trained predictor's benefit score in (0, 1); dropout disabled."""
    if lbap is None or not getattr(lbap, "trained", False):
        raise ValueError("beacon scoring requires a trained LBAP")
    return lbap.forward(p, training=False)


_BASELINE_FNS = {
    ScoreKind.ENTROPY: score_entropy,
    ScoreKind.MSP: score_msp,
    ScoreKind.MARGIN: score_margin,
    ScoreKind.TOP3: score_top3,
    ScoreKind.GINI: score_gini,
}


def criterion_scores(kind, p, lbap=None) -> np.ndarray:
    """Dispatch one criterion over a probability vector or (n, C) batch."""
    kind = ScoreKind(kind)
    if kind == ScoreKind.BEACON:
        return np.atleast_1d(score_beacon(p, lbap))
    return np.atleast_1d(_BASELINE_FNS[kind](p))


def percentile_threshold(scores, q, kind=None) -> Threshold:
    """Nearest-rank percentile of the reference scores.

    The cutoff is the (floor(q*n/100) + 1)-th smallest score, so with distinct
    scores exactly floor(q*n/100) of them fall strictly below it. q = 0 and
    q = 100 resolve to -inf/+inf so nothing (everything) exits.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ValueError("cannot take a percentile of an empty score list")
    if not 0.0 <= q <= 100.0:
        raise ValueError("percentile must be in [0, 100]")
    if q == 0:
        value = -np.inf
    elif q == 100:
        value = np.inf
    else:
        rank = int(math.floor(q * scores.size / 100.0 + 1e-9))
        value = float(np.sort(scores)[min(rank, scores.size - 1)])
    return Threshold(kind, float(q), value)


def decide(score: float, threshold: Threshold) -> ExitDecision:
    """Exit iff score < threshold; ties forward."""
    return ExitDecision.EXIT if score < threshold.value else ExitDecision.FORWARD


def exit_mask(scores, threshold: Threshold) -> np.ndarray:
    """Vectorized decide(): True where the sample exits early."""
    return np.asarray(scores) < threshold.value
