"""Evaluation protocols: outcome taxonomy, entropy bins, threshold sweeps,
budget queries, invocation analysis, and SNR-band breakdowns.

Analysis always runs both heads for every sample; thresholds are resolved on
validation scores and applied unchanged to the evaluation split. All
reductions run in canonical sample order so reports are bit-reproducible.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .criteria import ScoreKind, criterion_scores, exit_mask, percentile_threshold
from .model import AmcModel, CostProfile
from .signals import Dataset

PERCENTILE_GRID = tuple(range(0, 101, 5))
INVOCATION_RATES = tuple(range(5, 101, 5))


class CaseLabel(enum.IntEnum):
    """Joint early/final outcome for one sample."""

    C11 = 0  # both heads correct
    C01 = 1  # early wrong, final correct (recoverable)
    C00 = 2  # both wrong
    C10 = 3  # early correct, final wrong


def classify_case(yhat_e, yhat_f, y):
    """Map prediction pairs to their outcome case; vectorized over arrays."""
    yhat_e = np.asarray(yhat_e)
    yhat_f = np.asarray(yhat_f)
    y = np.asarray(y)
    e_ok = yhat_e == y
    f_ok = yhat_f == y
    out = np.where(
        e_ok & f_ok,
        CaseLabel.C11,
        np.where(~e_ok & f_ok, CaseLabel.C01, np.where(~e_ok & ~f_ok, CaseLabel.C00, CaseLabel.C10)),
    )
    if out.ndim == 0:
        return CaseLabel(int(out))
    return out.astype(np.int64)


@dataclass
class ExitTable:
    """Per-sample record of both heads' outputs over one evaluation split."""

    ids: np.ndarray
    split: str
    snr_db: np.ndarray
    labels: np.ndarray
    p_e: np.ndarray
    p_f: np.ndarray
    yhat_e: np.ndarray
    yhat_f: np.ndarray
    case: np.ndarray

    @classmethod
    def from_model(cls, model: AmcModel, dataset: Dataset, split: str, batch_size: int = 256):
        ids = dataset.indices(split)
        x, y, snr = dataset.arrays_for(split)
        p_e_parts, p_f_parts = [], []
        for lo in range(0, x.shape[0], batch_size):
            pair = model.forward_full(x[lo : lo + batch_size])
            p_e_parts.append(pair.p_e)
            p_f_parts.append(pair.p_f)
        p_e = np.concatenate(p_e_parts)
        p_f = np.concatenate(p_f_parts)
        yhat_e = np.argmax(p_e, axis=-1)
        yhat_f = np.argmax(p_f, axis=-1)
        return cls(
            ids=ids,
            split=split,
            snr_db=snr,
            labels=y,
            p_e=p_e,
            p_f=p_f,
            yhat_e=yhat_e,
            yhat_f=yhat_f,
            case=classify_case(yhat_e, yhat_f, y),
        )

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def ee_accuracy(self) -> float:
        return float(np.mean(self.yhat_e == self.labels))

    @property
    def fe_accuracy(self) -> float:
        return float(np.mean(self.yhat_f == self.labels))


@dataclass
class RecoveryStats:
    p_recov: float
    cond_recov: Optional[float]


def recovery_stats(case) -> RecoveryStats:
    """Recoverable fraction of the set and of the early-error subset."""
    case = np.asarray(case)
    n_c01 = int(np.sum(case == CaseLabel.C01))
    n_c00 = int(np.sum(case == CaseLabel.C00))
    p_recov = n_c01 / case.size
    cond = n_c01 / (n_c01 + n_c00) if (n_c01 + n_c00) > 0 else None
    return RecoveryStats(p_recov, cond)


# ---------------------------------------------------------------------------
# entropy bins

N_BINS = 10


@dataclass
class BinRow:
    lo: float
    hi: float
    count: int
    samples_pct: float
    c11_pct: float
    c01_pct: float
    c00_pct: float
    c10_pct: float


def entropy_bin_table(table: ExitTable) -> list:
    """Per-bin outcome shares over width-0.1 entropy bins (last bin closed)."""
    if len(table) == 0:
        raise ValueError("cannot bin an empty evaluation set")
    scores = criterion_scores(ScoreKind.ENTROPY, table.p_e)
    bins = np.minimum((scores * N_BINS).astype(int), N_BINS - 1)
    n = len(table)
    rows = []
    for b in range(N_BINS):
        mask = bins == b
        count = int(mask.sum())
        shares = []
        for c in (CaseLabel.C11, CaseLabel.C01, CaseLabel.C00, CaseLabel.C10):
            shares.append(100.0 * np.sum(table.case[mask] == c) / count if count else 0.0)
        rows.append(
            BinRow(
                lo=b / N_BINS,
                hi=(b + 1) / N_BINS,
                count=count,
                samples_pct=100.0 * count / n,
                c11_pct=shares[0],
                c01_pct=shares[1],
                c00_pct=shares[2],
                c10_pct=shares[3],
            )
        )
    return rows


# ---------------------------------------------------------------------------
# threshold sweeps


@dataclass
class TradeoffPoint:
    percentile: float
    threshold: float
    forward_fraction: float
    avg_macs: float
    accuracy: float
    n_forwarded: int


@dataclass
class TradeoffCurve:
    criterion: ScoreKind
    exit_point: int
    split: str
    n: int
    points: list = field(default_factory=list)

    def accuracies(self) -> np.ndarray:
        return np.array([p.accuracy for p in self.points])

    def macs(self) -> np.ndarray:
        return np.array([p.avg_macs for p in self.points])


def _masked_point(q, threshold, mask_exit, yhat_e, yhat_f, labels, profile, uses_lbap):
    n = mask_exit.size
    chosen = np.where(mask_exit, yhat_e, yhat_f)
    accuracy = float(np.mean(chosen == labels))
    n_fwd = int(n - mask_exit.sum())
    c_exit = profile.exit_cost(uses_lbap)
    c_full = profile.full_cost(uses_lbap)
    # exact count form: identical to the mean of per-sample path costs
    avg = ((n - n_fwd) * c_exit + n_fwd * c_full) / n
    return TradeoffPoint(
        percentile=float(q),
        threshold=float(threshold),
        forward_fraction=n_fwd / n,
        avg_macs=avg,
        accuracy=accuracy,
        n_forwarded=n_fwd,
    )


def sweep_tradeoff(
    val_table: ExitTable,
    eval_table: ExitTable,
    kind,
    profile: CostProfile,
    lbap=None,
    exit_point: int = 0,
    percentiles=PERCENTILE_GRID,
) -> TradeoffCurve:
    """Trade-off curve over the percentile grid, thresholds from validation.

    The predictor's own MACs enter the accounting only for the beacon
    criterion.
    """
    kind = ScoreKind(kind)
    if kind == ScoreKind.BEACON and lbap is None:
        raise ValueError("beacon sweep requires a trained LBAP")
    uses_lbap = kind == ScoreKind.BEACON
    val_scores = criterion_scores(kind, val_table.p_e, lbap)
    eval_scores = criterion_scores(kind, eval_table.p_e, lbap)
    curve = TradeoffCurve(kind, exit_point, eval_table.split, len(eval_table))
    for q in percentiles:
        t = percentile_threshold(val_scores, q, kind)
        mask = exit_mask(eval_scores, t)
        curve.points.append(
            _masked_point(q, t.value, mask, eval_table.yhat_e, eval_table.yhat_f, eval_table.labels, profile, uses_lbap)
        )
    return curve


def max_acc_under_budget(curve: TradeoffCurve, budget: float) -> Optional[float]:
    """Best accuracy among operating points strictly cheaper than the budget."""
    ok = [p.accuracy for p in curve.points if p.avg_macs < budget]
    return max(ok) if ok else None


def min_macs_for_accuracy(curve: TradeoffCurve, acc_req: float) -> Optional[float]:
    """Cheapest operating point whose accuracy meets the requirement."""
    ok = [p.avg_macs for p in curve.points if p.accuracy >= acc_req]
    return min(ok) if ok else None


# ---------------------------------------------------------------------------
# rate-matched selection (forward exactly k samples, by score order)


def forward_order(scores, ids) -> np.ndarray:
    """Positions sorted by descending score; ties broken by ascending id."""
    return np.lexsort((np.asarray(ids), -np.asarray(scores, dtype=float)))


def rate_matched_points(table: ExitTable, scores, rates=INVOCATION_RATES) -> list:
    """(rate, n_forwarded, accuracy, recoverable-rate-among-forwarded) rows.

    For each target rate the ceil(rate*n/100) highest-scoring samples are
    forwarded, so every criterion is compared at identical forward counts.
    """
    n = len(table)
    order = forward_order(scores, table.ids)
    e_ok = table.yhat_e == table.labels
    f_ok = table.yhat_f == table.labels
    rows = []
    for r in rates:
        k = math.ceil(r * n / 100.0)
        fwd = order[:k]
        correct = e_ok.copy()
        correct[fwd] = f_ok[fwd]
        recov = float(np.mean(table.case[fwd] == CaseLabel.C01)) if k else 0.0
        rows.append((float(r), int(k), float(np.mean(correct)), recov))
    return rows


def invocation_vs_recoverable(table: ExitTable, kind, lbap=None, rates=INVOCATION_RATES) -> list:
    """(invocation rate, recoverable-error rate among forwarded) pairs."""
    scores = criterion_scores(kind, table.p_e, lbap)
    return [(r, recov) for r, _, _, recov in rate_matched_points(table, scores, rates)]


def oracle_scores(case) -> np.ndarray:
    """Ideal forwarding order from the true outcome cases.

    Recoverable errors first, then outcome-neutral samples, degradation cases
    last; this is the exact upper bound any score-based criterion can reach at
    a given forward count.
    """
    case = np.asarray(case)
    return np.where(case == CaseLabel.C01, 1.0, np.where(case == CaseLabel.C10, 0.0, 0.5))


# ---------------------------------------------------------------------------
# SNR bands

SNR_BANDS = {
    "high": (10, 20),
    "medium": (0, 10),
    "low": (-10, 0),
    "very_low": (-20, -10),
}


def band_mask(snr_db, band: str) -> np.ndarray:
    lo, hi = SNR_BANDS[band]
    snr_db = np.asarray(snr_db)
    if band == "high":  # the top band is closed at 20 dB
        return (snr_db >= lo) & (snr_db <= hi)
    return (snr_db >= lo) & (snr_db < hi)


def snr_grouped_tradeoff(
    val_table: ExitTable,
    eval_table: ExitTable,
    kind,
    profile: CostProfile,
    lbap=None,
    exit_point: int = 0,
    percentiles=PERCENTILE_GRID,
    bands=tuple(SNR_BANDS),
) -> dict:
    """Per-band curves under globally (validation-)resolved thresholds."""
    kind = ScoreKind(kind)
    uses_lbap = kind == ScoreKind.BEACON
    val_scores = criterion_scores(kind, val_table.p_e, lbap)
    eval_scores = criterion_scores(kind, eval_table.p_e, lbap)
    out = {}
    for band in bands:
        mask = band_mask(eval_table.snr_db, band)
        if not mask.any():
            raise ValueError(f"no samples in SNR band {band!r}")
        curve = TradeoffCurve(kind, exit_point, f"{eval_table.split}:{band}", int(mask.sum()))
        for q in percentiles:
            t = percentile_threshold(val_scores, q, kind)
            m = exit_mask(eval_scores[mask], t)
            curve.points.append(
                _masked_point(
                    q,
                    t.value,
                    m,
                    eval_table.yhat_e[mask],
                    eval_table.yhat_f[mask],
                    eval_table.labels[mask],
                    profile,
                    uses_lbap,
                )
            )
        out[band] = curve
    return out
