"""Command-line pipeline: data generation, training stages, and report emitters.

Artifacts live under --out: dataset.bin, backbone.ck(+.manifest),
model_ee{K}.ck(+.manifest), lbap_ee{K}.ck, and one CSV per report command.
Exit codes: 0 ok, 2 usage, 3 bad file format, 4 checksum mismatch,
5 training divergence, 1 anything else.
"""

from __future__ import annotations

import argparse
import sys
import zlib
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .criteria import ScoreKind, criterion_scores
from .errors import (
    FileChecksumError,
    FileFormatError,
    FileTruncatedError,
    TrainingDivergedError,
)
from .evaluation import (
    ExitTable,
    entropy_bin_table,
    invocation_vs_recoverable,
    recovery_stats,
    snr_grouped_tradeoff,
    sweep_tradeoff,
)
from .lbap import (
    calibration_report,
    load_lbap,
    recoverability_label,
    save_lbap,
    train_lbap,
)
from .model import load_model, save_model
from .nnet.gradcheck import gradcheck_conv1d, gradcheck_dense
from .reports import (
    standard_meta,
    write_bins_csv,
    write_budget_csv,
    write_calibration_csv,
    write_csv,
    write_invocation_csv,
    write_mincost_csv,
    write_run_manifest,
    write_score_dump,
    write_snr_csv,
    write_stats_csv,
    write_tradeoff_csv,
)
from .signals import generate_dataset, load_dataset, save_dataset
from .training import train_backbone, train_exit_branch

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FORMAT = 3
EXIT_CHECKSUM = 4
EXIT_DIVERGED = 5

ALL_CRITERIA = tuple(k.value for k in ScoreKind)


def _file_crc(path) -> str:
    return f"{zlib.crc32(Path(path).read_bytes()):08x}"


class _Ctx:
    """Paths and lazy loading shared by the subcommands."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.config = cfgmod.load_config(args.config, args.seed)
        self.config_hash = cfgmod.config_hash(self.config)
        self.exit_point = args.exit_point

    # --- paths ---------------------------------------------------------------

    @property
    def dataset_path(self):
        return self.out / "dataset.bin"

    @property
    def backbone_ck(self):
        return self.out / "backbone.ck"

    def model_ck(self, e=None):
        e = e or self.exit_point
        return self.out / f"model_ee{e}.ck"

    def lbap_ck(self, e=None):
        e = e or self.exit_point
        return self.out / f"lbap_ee{e}.ck"

    # --- loaders -------------------------------------------------------------

    def dataset(self):
        return load_dataset(self.dataset_path)

    def model(self):
        path = self.model_ck()
        return load_model(path, path.with_suffix(".manifest"))

    def lbap(self):
        return load_lbap(self.lbap_ck(), dropout_rate=self.config["lbap"]["dropout_rate"])

    def tables(self, model, dataset, split):
        return (
            ExitTable.from_model(model, dataset, "val"),
            ExitTable.from_model(model, dataset, split),
        )

    def meta(self, **extra):
        return standard_meta(self.config_hash, self.config["dataset"]["seed"], **extra)

    def manifest(self, command, outputs, **extra):
        payload = {
            "command": command,
            "config_hash": self.config_hash,
            "seeds": {
                "dataset": self.config["dataset"]["seed"],
                "backbone": self.config["backbone"]["seed"],
                "exit": self.config["exit"]["seed"],
                "lbap": self.config["lbap"]["seed"],
            },
            "outputs": {name: _file_crc(path) for name, path in outputs.items()},
        }
        payload.update(extra)
        write_run_manifest(self.out / f"manifest_{command}.json", payload)


def _write_history(path, history, meta):
    rows = [(e.epoch, e.train_loss, e.val_metric) for e in history.epochs]
    write_csv(path, ("epoch", "train_loss", "val_metric"), rows, meta)


# --- subcommand handlers -----------------------------------------------------


def cmd_gen_data(ctx: _Ctx):
    dataset = generate_dataset(cfgmod.gen_config(ctx.config))
    save_dataset(dataset, ctx.dataset_path)
    ctx.manifest("gen-data", {"dataset.bin": ctx.dataset_path}, n_frames=len(dataset))
    print(f"wrote {ctx.dataset_path} ({len(dataset)} frames)")


def cmd_train_backbone(ctx: _Ctx):
    dataset = ctx.dataset()
    model, history = train_backbone(
        dataset,
        cfgmod.backbone_hyper(ctx.config),
        exit_point=ctx.exit_point,
        arch=cfgmod.arch_config(ctx.config),
        augment=ctx.config["backbone"]["augment"],
    )
    save_model(model, ctx.backbone_ck, ctx.backbone_ck.with_suffix(".manifest"))
    _write_history(ctx.out / "backbone_history.csv", history, ctx.meta())
    ctx.manifest(
        "train-backbone",
        {"backbone.ck": ctx.backbone_ck},
        final_val_accuracy=history.final_val_metric,
    )
    print(f"backbone trained: final val accuracy {history.final_val_metric:.4f}")


def cmd_train_exit(ctx: _Ctx):
    from .model import AmcModel
    from .nnet.checkpoint import load_params
    from .signals import STREAM_INIT

    dataset = ctx.dataset()
    rng = np.random.default_rng(
        np.random.SeedSequence(ctx.config["exit"]["seed"], spawn_key=(STREAM_INIT,))
    )
    model = AmcModel(ctx.exit_point, cfgmod.arch_config(ctx.config), rng=rng)
    trunk = {k: v for k, v in load_params(ctx.backbone_ck).items() if not k.startswith("ee_head.")}
    model.load_param_dict(trunk, strict=True)
    history = train_exit_branch(model, dataset, cfgmod.exit_hyper(ctx.config))
    path = ctx.model_ck()
    save_model(model, path, path.with_suffix(".manifest"))
    _write_history(ctx.out / f"exit_ee{ctx.exit_point}_history.csv", history, ctx.meta())
    ctx.manifest(
        "train-exit",
        {path.name: path},
        exit_point=ctx.exit_point,
        final_val_accuracy=history.final_val_metric,
    )
    print(f"exit head (stage {ctx.exit_point}) trained: val accuracy {history.final_val_metric:.4f}")


def cmd_train_lbap(ctx: _Ctx):
    dataset = ctx.dataset()
    model = ctx.model()
    train = ExitTable.from_model(model, dataset, "train")
    val = ExitTable.from_model(model, dataset, "val")
    lb = ctx.config["lbap"]
    net, history = train_lbap(
        train.p_e,
        recoverability_label(train.yhat_e, train.yhat_f, train.labels),
        val.p_e,
        recoverability_label(val.yhat_e, val.yhat_f, val.labels),
        learning_rate=lb["learning_rate"],
        batch_size=lb["batch_size"],
        max_epochs=lb["max_epochs"],
        patience=lb["patience"],
        dropout_rate=lb["dropout_rate"],
        rng_seed=lb["seed"],
    )
    save_lbap(net, ctx.lbap_ck())
    rows = [(i, tr, va) for i, (tr, va) in enumerate(zip(history.train_bce, history.val_bce))]
    write_csv(ctx.out / f"lbap_ee{ctx.exit_point}_history.csv", ("epoch", "train_bce", "val_bce"), rows, ctx.meta())
    ctx.manifest(
        "train-lbap",
        {ctx.lbap_ck().name: ctx.lbap_ck()},
        exit_point=ctx.exit_point,
        best_val_bce=history.best_val_bce,
    )
    print(f"lbap trained: best val BCE {history.best_val_bce:.4f} (epoch {history.best_epoch})")


def _lbap_if_needed(ctx, kinds):
    if any(ScoreKind(k) == ScoreKind.BEACON for k in kinds):
        return ctx.lbap()
    return None


def cmd_sweep(ctx: _Ctx):
    dataset = ctx.dataset()
    model = ctx.model()
    kind = ScoreKind(ctx.args.criterion)
    lbap = _lbap_if_needed(ctx, [kind])
    val, ev = ctx.tables(model, dataset, ctx.args.split)
    profile = model.count_macs()
    curve = sweep_tradeoff(val, ev, kind, profile, lbap, exit_point=ctx.exit_point)
    name = f"sweep_{kind.value}_ee{ctx.exit_point}.csv"
    write_tradeoff_csv(ctx.out / name, curve, ctx.meta(criterion=kind.value, split=ctx.args.split))
    stats_name = f"stats_ee{ctx.exit_point}.csv"
    write_stats_csv(ctx.out / stats_name, f"ee{ctx.exit_point}", ev, recovery_stats(ev.case), ctx.meta(split=ctx.args.split))
    scores = criterion_scores(kind, ev.p_e, lbap)
    dump_name = f"scores_{kind.value}_ee{ctx.exit_point}.csv"
    write_score_dump(ctx.out / dump_name, ev, kind, scores, ctx.meta())
    ctx.manifest(
        "sweep",
        {name: ctx.out / name, stats_name: ctx.out / stats_name, dump_name: ctx.out / dump_name},
        criterion=kind.value,
        exit_point=ctx.exit_point,
    )
    print(f"wrote {name}")


def cmd_bins(ctx: _Ctx):
    dataset = ctx.dataset()
    model = ctx.model()
    table = ExitTable.from_model(model, dataset, ctx.args.split)
    rows = entropy_bin_table(table)
    name = f"bins_ee{ctx.exit_point}.csv"
    write_bins_csv(ctx.out / name, rows, ctx.meta(split=ctx.args.split))
    ctx.manifest("bins", {name: ctx.out / name}, exit_point=ctx.exit_point)
    print(f"wrote {name}")


def _all_curves(ctx, dataset, model, split):
    lbap = ctx.lbap()
    val, ev = ctx.tables(model, dataset, split)
    profile = model.count_macs()
    return {
        k: sweep_tradeoff(val, ev, k, profile, lbap if k == ScoreKind.BEACON else None, exit_point=ctx.exit_point)
        for k in ScoreKind
    }


def cmd_budget(ctx: _Ctx):
    curves = _all_curves(ctx, ctx.dataset(), ctx.model(), ctx.args.split)
    budgets = [float(b) for b in ctx.args.budgets.split(",")]
    name = f"budget_ee{ctx.exit_point}.csv"
    write_budget_csv(ctx.out / name, budgets, curves, ctx.meta(split=ctx.args.split))
    ctx.manifest("budget", {name: ctx.out / name}, exit_point=ctx.exit_point)
    print(f"wrote {name}")


def cmd_min_cost(ctx: _Ctx):
    curves = _all_curves(ctx, ctx.dataset(), ctx.model(), ctx.args.split)
    reqs = [float(a) for a in ctx.args.acc_reqs.split(",")]
    name = f"mincost_ee{ctx.exit_point}.csv"
    write_mincost_csv(ctx.out / name, reqs, curves, ctx.meta(split=ctx.args.split))
    ctx.manifest("min-cost", {name: ctx.out / name}, exit_point=ctx.exit_point)
    print(f"wrote {name}")


def cmd_invocation(ctx: _Ctx):
    dataset = ctx.dataset()
    model = ctx.model()
    lbap = ctx.lbap()
    table = ExitTable.from_model(model, dataset, ctx.args.split)
    rows_by_kind = {
        k: invocation_vs_recoverable(table, k, lbap if k == ScoreKind.BEACON else None) for k in ScoreKind
    }
    name = f"invocation_ee{ctx.exit_point}.csv"
    write_invocation_csv(ctx.out / name, rows_by_kind, ctx.meta(split=ctx.args.split))
    ctx.manifest("invocation", {name: ctx.out / name}, exit_point=ctx.exit_point)
    print(f"wrote {name}")


def cmd_snr_report(ctx: _Ctx):
    from .evaluation import SNR_BANDS, band_mask

    dataset = ctx.dataset()
    model = ctx.model()
    kind = ScoreKind(ctx.args.criterion)
    lbap = _lbap_if_needed(ctx, [kind])
    val, ev = ctx.tables(model, dataset, ctx.args.split)
    present = tuple(b for b in SNR_BANDS if band_mask(ev.snr_db, b).any())
    bands = snr_grouped_tradeoff(val, ev, kind, model.count_macs(), lbap, exit_point=ctx.exit_point, bands=present)
    name = f"snr_{kind.value}_ee{ctx.exit_point}.csv"
    write_snr_csv(ctx.out / name, bands, ctx.meta(criterion=kind.value, split=ctx.args.split))
    ctx.manifest("snr-report", {name: ctx.out / name}, exit_point=ctx.exit_point)
    print(f"wrote {name}")


def cmd_calibration(ctx: _Ctx):
    dataset = ctx.dataset()
    model = ctx.model()
    lbap = ctx.lbap()
    table = ExitTable.from_model(model, dataset, ctx.args.split)
    scores = lbap.forward(table.p_e)
    labels = recoverability_label(table.yhat_e, table.yhat_f, table.labels)
    report = calibration_report(scores, labels)
    name = f"calibration_ee{ctx.exit_point}.csv"
    write_calibration_csv(ctx.out / name, f"ee{ctx.exit_point}", report, ctx.meta(split=ctx.args.split))
    ctx.manifest("calibration", {name: ctx.out / name}, exit_point=ctx.exit_point, abs_gap=report.abs_gap)
    print(f"wrote {name} (abs gap {report.abs_gap:.4f})")


def cmd_gradcheck(ctx: _Ctx):
    from .lbap import LbapNet
    from .nnet.gradcheck import gradcheck
    from .nnet.layers import sigmoid
    from .nnet.losses import bce

    tolerance = 1e-3
    failures = 0
    for seed in range(5):
        for name, report in (
            ("dense", gradcheck_dense(seed=seed)),
            ("conv1d_s1", gradcheck_conv1d(stride=1, seed=seed)),
            ("conv1d_s2", gradcheck_conv1d(stride=2, seed=seed)),
        ):
            ok = report.passed(tolerance)
            failures += 0 if ok else 1
            print(f"{name} seed={seed}: max_rel_err={report.max_rel_err:.3e} {'ok' if ok else 'FAIL'}")
    for seed in range(3):
        rng = np.random.default_rng(seed)
        net = LbapNet(rng=rng, dtype=np.float64)
        for arr in net.parameters().values():
            arr += 0.05 * rng.standard_normal(arr.shape)  # keep pre-activations off relu kinks
        probs = rng.dirichlet(np.ones(10), size=4)
        labels = rng.integers(0, 2, 4).astype(float)

        def loss():
            return float(np.mean(bce(net.forward(probs), labels)))

        z = net.forward_logits(probs)
        s = sigmoid(z)
        net.backward_from_logits((s - labels) / labels.size)
        report = gradcheck(loss, net.parameters(), net.gradients())
        ok = report.passed(tolerance)
        failures += 0 if ok else 1
        print(f"lbap seed={seed}: max_rel_err={report.max_rel_err:.3e} {'ok' if ok else 'FAIL'}")
    if failures:
        raise RuntimeError(f"{failures} gradient checks failed")
    print("all gradient checks passed")


# --- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beacon-amc",
        description="Benefit-aware early-exit inference pipeline for modulation classification.",
    )
    parser.add_argument("--config", default=None, help="JSON config path (merged over defaults)")
    parser.add_argument("--seed", type=int, default=None, help="override the base seed of every stage")
    parser.add_argument("--out", default="runs", help="artifact directory")
    parser.add_argument("--exit-point", type=int, choices=(1, 2, 3), default=1)
    parser.add_argument("--criterion", choices=ALL_CRITERIA, default="beacon")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(handler=handler)
        return p

    add("gen-data", cmd_gen_data, help="generate and save the synthetic dataset")
    add("train-backbone", cmd_train_backbone, help="train the shared backbone and final head")
    add("train-exit", cmd_train_exit, help="train the exit head on the frozen backbone")
    add("train-lbap", cmd_train_lbap, help="train the recoverability predictor")
    for name, handler in (
        ("sweep", cmd_sweep),
        ("bins", cmd_bins),
        ("budget", cmd_budget),
        ("min-cost", cmd_min_cost),
        ("invocation", cmd_invocation),
        ("snr-report", cmd_snr_report),
        ("calibration", cmd_calibration),
    ):
        p = add(name, handler, help=f"emit the {name} report CSV")
        p.add_argument("--split", choices=("val", "test"), default="test")
        if name == "budget":
            p.add_argument("--budgets", default="1e6,1.5e6,2e6,2.5e6")
        if name == "min-cost":
            p.add_argument("--acc-reqs", default="0.3,0.4,0.5")
    add("gradcheck", cmd_gradcheck, help="finite-difference verification of all layer gradients")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.handler(_Ctx(args))
    except (FileFormatError, FileTruncatedError) as exc:
        print(f"error (format): {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except FileChecksumError as exc:
        print(f"error (checksum): {exc}", file=sys.stderr)
        return EXIT_CHECKSUM
    except TrainingDivergedError as exc:
        print(f"error (diverged): {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except Exception as exc:  # noqa: BLE001 - the CLI boundary maps everything to a code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
