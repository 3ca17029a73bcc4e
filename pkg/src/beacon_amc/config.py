"""Run configuration: JSON file on disk, deep-merged over defaults, hashable."""

from __future__ import annotations

import copy
import hashlib
import json

from .signals import GenConfig, Impairments, SNR_GRID_FULL
from .training import TrainHyper

DEFAULT_CONFIG = {
    "dataset": {
        "frames_per_scheme_per_snr": 20,
        "snr_grid": list(SNR_GRID_FULL),
        "samples_per_symbol": 8,
        "seed": 7,
        "impairments": {
            "phase_offset": True,
            "freq_offset": True,
            "timing_jitter": False,
            "cfo_max": 1e-3,
            "jitter_max": 4,
        },
    },
    "arch": {
        "stem_channels": 16,
        "stage_channels": [16, 32, 64],
        "stem_kernel": 7,
        "block_kernel": 5,
    },
    "backbone": {
        "learning_rate": 1e-3,
        "epochs": 30,
        "batch_size": 64,
        "optimizer": "adam",
        "seed": 11,
        "augment": True,
    },
    "exit": {
        "learning_rate": 1e-3,
        "epochs": 80,
        "batch_size": 64,
        "optimizer": "adam",
        "seed": 12,
    },
    "lbap": {
        "learning_rate": 1e-3,
        "batch_size": 256,
        "max_epochs": 200,
        "patience": 10,
        "dropout_rate": 0.2,
        "seed": 13,
    },
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None, seed_override=None) -> dict:
    """Defaults, overlaid with the JSON file; --seed rebases every stage seed."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as fh:
            config = _deep_merge(config, json.load(fh))
    if seed_override is not None:
        config["dataset"]["seed"] = seed_override
        config["backbone"]["seed"] = seed_override + 1
        config["exit"]["seed"] = seed_override + 2
        config["lbap"]["seed"] = seed_override + 3
    return config


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def gen_config(config: dict) -> GenConfig:
    d = config["dataset"]
    return GenConfig(
        frames_per_scheme_per_snr=d["frames_per_scheme_per_snr"],
        snr_grid=tuple(d["snr_grid"]),
        samples_per_symbol=d["samples_per_symbol"],
        rng_seed=d["seed"],
        impairments=Impairments(**d["impairments"]),
    )


def arch_config(config: dict):
    from .model import ArchConfig

    a = config["arch"]
    return ArchConfig(
        stem_channels=a["stem_channels"],
        stage_channels=tuple(a["stage_channels"]),
        stem_kernel=a["stem_kernel"],
        block_kernel=a["block_kernel"],
    )


def backbone_hyper(config: dict) -> TrainHyper:
    b = config["backbone"]
    return TrainHyper(
        learning_rate=b["learning_rate"],
        epochs=b["epochs"],
        batch_size=b["batch_size"],
        optimizer=b["optimizer"],
        rng_seed=b["seed"],
    )


def exit_hyper(config: dict) -> TrainHyper:
    e = config["exit"]
    return TrainHyper(
        learning_rate=e["learning_rate"],
        epochs=e["epochs"],
        batch_size=e["batch_size"],
        optimizer=e["optimizer"],
        rng_seed=e["seed"],
    )
