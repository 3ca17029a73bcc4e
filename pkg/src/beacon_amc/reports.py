"""CSV report emitters and the JSON run manifest.

Every CSV starts with '#'-prefixed provenance lines (config hash, seeds, and
the note that thresholds are calibrated on the validation split), then a
header row. Floats are formatted with repr-stable %.10g so identical runs
produce identical bytes.
"""

from __future__ import annotations

import json

import numpy as np

from .criteria import ScoreKind
from .evaluation import TradeoffCurve


def _fmt(value) -> str:
    if value is None:
        return "absent"
    if isinstance(value, float) or isinstance(value, np.floating):
        return f"{float(value):.10g}"
    return str(value)


def write_csv(path, columns, rows, meta=None) -> None:
    lines = []
    for key, value in (meta or {}).items():
        lines.append(f"# {key}={value}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def standard_meta(config_hash=None, seed=None, **extra) -> dict:
    meta = {}
    if config_hash is not None:
        meta["config_hash"] = config_hash
    if seed is not None:
        meta["seed"] = seed
    meta["threshold_calibration"] = "validation"
    meta.update(extra)
    return meta


def write_tradeoff_csv(path, curve: TradeoffCurve, meta=None) -> None:
    rows = [
        (p.percentile, p.threshold, p.forward_fraction, p.avg_macs, p.accuracy)
        for p in curve.points
    ]
    write_csv(path, ("percentile", "threshold", "forward_fraction", "avg_macs", "accuracy"), rows, meta)


def write_stats_csv(path, model_name, table, stats, meta=None) -> None:
    cond = stats.cond_recov if stats.cond_recov is not None else None
    rows = [(model_name, table.ee_accuracy, table.fe_accuracy, stats.p_recov, cond)]
    write_csv(path, ("model", "ee_acc", "fe_acc", "p_recov", "cond_recov"), rows, meta)


def write_bins_csv(path, rows, meta=None) -> None:
    data = [
        (f"[{r.lo:.1f},{r.hi:.1f}{']' if r.hi == 1.0 else ')'}", r.samples_pct, r.c11_pct, r.c01_pct, r.c00_pct, r.c10_pct)
        for r in rows
    ]
    write_csv(path, ("entropy_bin", "samples_pct", "c11_pct", "c01_pct", "c00_pct", "c10_pct"), data, meta)


def write_budget_csv(path, budgets, curves: dict, meta=None) -> None:
    """One row per budget, one accuracy column per criterion (beacon first)."""
    from .evaluation import max_acc_under_budget

    kinds = [k for k in (ScoreKind.BEACON, *ScoreKind) if k in curves]
    kinds = list(dict.fromkeys(kinds))
    rows = []
    for budget in budgets:
        rows.append((budget, *[max_acc_under_budget(curves[k], budget) for k in kinds]))
    write_csv(path, ("budget_macs", *[k.value for k in kinds]), rows, meta)


def write_mincost_csv(path, acc_reqs, curves: dict, meta=None) -> None:
    """Per requirement: each criterion's min MACs and its ratio to beacon."""
    from .evaluation import min_macs_for_accuracy

    kinds = [k for k in (ScoreKind.BEACON, *ScoreKind) if k in curves]
    kinds = list(dict.fromkeys(kinds))
    columns = ["acc_req"]
    for k in kinds:
        columns.append(f"{k.value}_macs")
        columns.append(f"{k.value}_ratio")
    rows = []
    for req in acc_reqs:
        vals = {k: min_macs_for_accuracy(curves[k], req) for k in kinds}
        ref = vals.get(ScoreKind.BEACON)
        row = [req]
        for k in kinds:
            row.append(vals[k])
            row.append(vals[k] / ref if (vals[k] is not None and ref) else None)
        rows.append(tuple(row))
    write_csv(path, columns, rows, meta)


def write_invocation_csv(path, rows_by_kind: dict, meta=None) -> None:
    rows = []
    for kind, pairs in rows_by_kind.items():
        for rate, recov in pairs:
            rows.append((ScoreKind(kind).value, rate, recov))
    write_csv(path, ("criterion", "invocation_rate_pct", "recoverable_rate_among_forwarded"), rows, meta)


def write_snr_csv(path, band_curves: dict, meta=None) -> None:
    rows = []
    for band, curve in band_curves.items():
        for p in curve.points:
            rows.append((band, p.percentile, p.forward_fraction, p.avg_macs, p.accuracy))
    write_csv(path, ("snr_band", "percentile", "forward_fraction", "avg_macs", "accuracy"), rows, meta)


def write_calibration_csv(path, model_name, report, meta=None) -> None:
    rows = [(model_name, report.avg_predicted, report.true_ratio, report.abs_gap)]
    write_csv(path, ("model", "avg_predicted", "true_ratio", "abs_gap"), rows, meta)


def write_score_dump(path, table, kind, scores, meta=None) -> None:
    kind = ScoreKind(kind).value
    rows = [
        (int(table.ids[i]), table.split, int(table.snr_db[i]), int(table.labels[i]),
         int(table.yhat_e[i]), int(table.yhat_f[i]), kind, scores[i])
        for i in range(len(table))
    ]
    write_csv(
        path,
        ("sample_id", "split", "snr_db", "label", "yhat_e", "yhat_f", "score_kind", "score"),
        rows,
        meta,
    )


def write_run_manifest(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
