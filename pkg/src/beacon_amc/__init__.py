"""Benefit-aware early-exit inference for automatic modulation classification.

Synthetic I/Q dataset generation, a compact trainable early-exit CNN, six
exit criteria (five confidence baselines plus a learned recoverability
predictor), and the full computation-accuracy evaluation suite.
"""

from .signals import (
    FRAME_LEN,
    NUM_CLASSES,
    SNR_GRID_FULL,
    Dataset,
    GenConfig,
    Impairments,
    LabeledFrame,
    ModulationScheme,
    apply_channel,
    augment,
    augment_batch,
    generate_dataset,
    load_dataset,
    modulate,
    save_dataset,
)
from .model import (
    AmcModel,
    ArchConfig,
    CostProfile,
    ExitPair,
    avg_macs,
    count_macs,
    load_model,
    save_model,
)
from .training import (
    TrainHistory,
    TrainHyper,
    param_checksums,
    train_backbone,
    train_exit_branch,
)
from .criteria import (
    ExitDecision,
    ScoreKind,
    Threshold,
    criterion_scores,
    decide,
    percentile_threshold,
    score_beacon,
    score_entropy,
    score_gini,
    score_margin,
    score_msp,
    score_top3,
)
from .lbap import (
    LbapNet,
    calibration_report,
    lbap_forward,
    lbap_overhead,
    load_lbap,
    recoverability_label,
    save_lbap,
    train_lbap,
)
from .evaluation import (
    CaseLabel,
    ExitTable,
    RecoveryStats,
    TradeoffCurve,
    TradeoffPoint,
    classify_case,
    entropy_bin_table,
    invocation_vs_recoverable,
    max_acc_under_budget,
    min_macs_for_accuracy,
    oracle_scores,
    rate_matched_points,
    recovery_stats,
    snr_grouped_tradeoff,
    sweep_tradeoff,
)
from .estimators import EarlyExitClassifier, RecoverabilityPredictor

__version__ = "0.1.0"
