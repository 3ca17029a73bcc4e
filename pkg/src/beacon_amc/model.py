"""Compact early-exit classifier for 2x128 I/Q frames.

A temporal-only convolutional backbone (stem + three residual stages, lengths
128/64/32) feeds two classification heads: a final-exit head on stage-3
features and an early-exit head attached after a configurable stage. The
module also owns the exact MAC accounting for every path through the network.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import StaleCacheError
from .nnet.layers import Conv1d, Dense, relu, softmax
from .signals import FRAME_LEN, NUM_CLASSES

LBAP_MACS = 2720  # canonical 10->64->32->1 predictor, counted by the same convention


@dataclass
class ArchConfig:
    stem_channels: int = 16
    stage_channels: tuple = (16, 32, 64)
    stem_kernel: int = 7
    block_kernel: int = 5


@dataclass
class CostProfile:
    """Additive MAC counts for the exit/forward paths of one model."""

    macs_prefix: int
    macs_ee_head: int
    macs_suffix: int
    macs_fe_head: int
    macs_lbap: int = LBAP_MACS

    def exit_cost(self, uses_lbap: bool = False) -> int:
        return self.macs_prefix + self.macs_ee_head + (self.macs_lbap if uses_lbap else 0)

    def full_cost(self, uses_lbap: bool = False) -> int:
        return self.exit_cost(uses_lbap) + self.macs_suffix + self.macs_fe_head


@dataclass
class ExitPair:
    """Paired head outputs for one frame or batch; p_f is None until computed."""

    p_e: np.ndarray
    p_f: Optional[np.ndarray]
    yhat_e: np.ndarray
    yhat_f: Optional[np.ndarray]


@dataclass
class ExitCache:
    activation: np.ndarray
    exit_point: int
    version: int
    squeeze: bool


class ResidualBlock:
    """conv -> relu -> conv plus a (projected) skip, relu on the sum."""

    def __init__(self, in_ch, out_ch, kernel, stride, rng, dtype=np.float32):
        self.conv1 = Conv1d(in_ch, out_ch, kernel, stride=stride, rng=rng, dtype=dtype)
        # zero-init second conv: the block starts as (projected) identity,
        # which keeps deep plain-conv training stable without normalization
        self.conv2 = Conv1d(out_ch, out_ch, kernel, stride=1, rng=None, dtype=dtype)
        if in_ch != out_ch or stride != 1:
            self.proj = Conv1d(in_ch, out_ch, 1, stride=stride, pad=0, rng=rng, dtype=dtype)
        else:
            self.proj = None
        self._h1 = None
        self._pre = None

    def forward(self, x):
        h1 = self.conv1.forward(x)
        a1 = relu(h1)
        h2 = self.conv2.forward(a1)
        s = self.proj.forward(x) if self.proj is not None else x
        pre = h2 + s
        self._h1 = h1
        self._pre = pre
        return relu(pre)

    def backward(self, grad_out):
        g = grad_out * (self._pre > 0)
        ga1 = self.conv2.backward(g)
        gh1 = ga1 * (self._h1 > 0)
        gx = self.conv1.backward(gh1)
        if self.proj is not None:
            gx = gx + self.proj.backward(g)
        else:
            gx = gx + g
        return gx

    def layers(self):
        out = [("conv1", self.conv1), ("conv2", self.conv2)]
        if self.proj is not None:
            out.append(("proj", self.proj))
        return out


def _gap(h):
    return h.mean(axis=2)


def _gap_backward(grad, length):
    return np.repeat(grad[:, :, None], length, axis=2) / length


class AmcModel:
    """Shared backbone with one early-exit head and the final-exit head.

    Any parameter write must be followed by touch(); forward_final() refuses
    caches produced under an older version stamp.
    """

    def __init__(self, exit_point: int, arch: ArchConfig = None, rng=None, dtype=np.float32):
        if exit_point not in (1, 2, 3):
            raise ValueError("exit_point must be 1, 2, or 3")
        arch = arch or ArchConfig()
        self.exit_point = exit_point
        self.arch = arch
        self.dtype = dtype
        ch = arch.stage_channels
        self.stem = Conv1d(2, arch.stem_channels, arch.stem_kernel, stride=1, rng=rng, dtype=dtype)
        self.stages = []
        in_ch = arch.stem_channels
        for i, out_ch in enumerate(ch):
            stride = 1 if i == 0 else 2
            self.stages.append(
                [
                    ResidualBlock(in_ch, out_ch, arch.block_kernel, stride, rng, dtype),
                    ResidualBlock(out_ch, out_ch, arch.block_kernel, 1, rng, dtype),
                ]
            )
            in_ch = out_ch
        # zero-init heads: both start at the uniform distribution
        self.ee_head = Dense(ch[exit_point - 1], NUM_CLASSES, rng=None, dtype=dtype)
        self.fe_head = Dense(ch[-1], NUM_CLASSES, rng=None, dtype=dtype)
        self._version = 0
        self._stem_pre = None
        self._exit_len = None

    # -- parameter bookkeeping ------------------------------------------------

    @property
    def version(self) -> int:
        return self._version

    def touch(self) -> None:
        self._version += 1

    def parameters(self) -> dict:
        params = {"stem.weight": self.stem.weight, "stem.bias": self.stem.bias}
        for si, stage in enumerate(self.stages, start=1):
            for bi, block in enumerate(stage, start=1):
                for lname, layer in block.layers():
                    params[f"stage{si}.block{bi}.{lname}.weight"] = layer.weight
                    params[f"stage{si}.block{bi}.{lname}.bias"] = layer.bias
        params["ee_head.weight"] = self.ee_head.weight
        params["ee_head.bias"] = self.ee_head.bias
        params["fe_head.weight"] = self.fe_head.weight
        params["fe_head.bias"] = self.fe_head.bias
        return params

    def gradients(self) -> dict:
        grads = {}
        for name, layer in self._named_layers():
            grads[f"{name}.weight"] = layer.grad_weight
            grads[f"{name}.bias"] = layer.grad_bias
        return grads

    def _named_layers(self):
        out = [("stem", self.stem)]
        for si, stage in enumerate(self.stages, start=1):
            for bi, block in enumerate(stage, start=1):
                for lname, layer in block.layers():
                    out.append((f"stage{si}.block{bi}.{lname}", layer))
        out.append(("ee_head", self.ee_head))
        out.append(("fe_head", self.fe_head))
        return out

    def load_param_dict(self, params: dict, strict: bool = True) -> None:
        own = self.parameters()
        for name, arr in params.items():
            if name not in own:
                if strict:
                    raise KeyError(f"unexpected parameter block {name!r}")
                continue
            if own[name].shape != arr.shape:
                raise ValueError(f"shape mismatch for {name}: {own[name].shape} vs {arr.shape}")
            own[name][...] = arr.astype(self.dtype)
        self.touch()

    # -- forward passes --------------------------------------------------------

    @staticmethod
    def _as_batch(frames):
        frames = np.asarray(frames)
        if frames.ndim == 2:
            return frames[None], True
        if frames.ndim == 3:
            return frames, False
        raise ValueError("frames must be (2, 128) or (n, 2, 128)")

    def _run_stem(self, x):
        pre = self.stem.forward(x.astype(self.dtype))
        self._stem_pre = pre
        return relu(pre)

    def _run_stage(self, h, stage_idx):
        for block in self.stages[stage_idx]:
            h = block.forward(h)
        return h

    def _head_probs(self, head, h):
        return softmax(head.forward(_gap(h)))

    def forward_to_exit(self, frames):
        """Run stem and stages up to the exit point; return EE probs + cache."""
        x, squeeze = self._as_batch(frames)
        if x.shape[1:] != (2, FRAME_LEN):
            raise ValueError(f"frames must be 2x{FRAME_LEN}")
        if not np.all(np.isfinite(x)):
            raise ValueError("frames must be finite")
        h = self._run_stem(x)
        for si in range(self.exit_point):
            h = self._run_stage(h, si)
        p_e = self._head_probs(self.ee_head, h)
        yhat_e = np.argmax(p_e, axis=-1)
        cache = ExitCache(h, self.exit_point, self._version, squeeze)
        if squeeze:
            pair = ExitPair(p_e[0], None, int(yhat_e[0]), None)
        else:
            pair = ExitPair(p_e, None, yhat_e, None)
        return pair, cache

    def forward_final(self, cache: ExitCache):
        """Continue from a cached exit-point activation to the FE probabilities."""
        if cache.version != self._version:
            raise StaleCacheError(
                f"cache from model version {cache.version}, parameters now at {self._version}"
            )
        h = cache.activation
        for si in range(cache.exit_point, len(self.stages)):
            h = self._run_stage(h, si)
        p_f = self._head_probs(self.fe_head, h)
        return p_f[0] if cache.squeeze else p_f

    def forward_full(self, frames) -> ExitPair:
        """Monolithic pass producing both heads' probabilities."""
        x, squeeze = self._as_batch(frames)
        h = self._run_stem(x)
        exit_feat = None
        for si in range(len(self.stages)):
            h = self._run_stage(h, si)
            if si == self.exit_point - 1:
                exit_feat = h
        p_e = self._head_probs(self.ee_head, exit_feat)
        p_f = self._head_probs(self.fe_head, h)
        yhat_e = np.argmax(p_e, axis=-1)
        yhat_f = np.argmax(p_f, axis=-1)
        if squeeze:
            return ExitPair(p_e[0], p_f[0], int(yhat_e[0]), int(yhat_f[0]))
        return ExitPair(p_e, p_f, yhat_e, yhat_f)

    # -- training-path forward/backward (final head) ---------------------------

    def forward_train(self, x):
        """Full-path forward returning FE logits, with caches kept for backward."""
        h = self._run_stem(x)
        for si in range(len(self.stages)):
            h = self._run_stage(h, si)
        self._fe_feat_len = h.shape[2]
        return self.fe_head.forward(_gap(h))

    def backward_train(self, grad_logits):
        """Backpropagate from FE-head logits through every backbone parameter."""
        g = self.fe_head.backward(grad_logits)
        g = _gap_backward(g, self._fe_feat_len)
        for si in reversed(range(len(self.stages))):
            for block in reversed(self.stages[si]):
                g = block.backward(g)
        g = g * (self._stem_pre > 0)
        self.stem.backward(g)

    def prefix_features(self, frames) -> np.ndarray:
        """Pooled exit-point features (n, ch); the EE head trains on these."""
        x, _ = self._as_batch(frames)
        h = self._run_stem(x)
        for si in range(self.exit_point):
            h = self._run_stage(h, si)
        return _gap(h)

    # -- MAC accounting ---------------------------------------------------------

    def count_macs(self) -> CostProfile:
        """Exact MAC counts; conv = out*in*k*L_out, dense = out*in, biases excluded."""
        length = FRAME_LEN
        stem_macs = self.stem.out_ch * self.stem.in_ch * self.stem.kernel * self.stem.out_len(length)
        length = self.stem.out_len(length)
        stage_macs = []
        for stage in self.stages:
            total = 0
            for block in stage:
                l_out = block.conv1.out_len(length)
                total += block.conv1.out_ch * block.conv1.in_ch * block.conv1.kernel * l_out
                total += block.conv2.out_ch * block.conv2.in_ch * block.conv2.kernel * l_out
                if block.proj is not None:
                    total += block.proj.out_ch * block.proj.in_ch * block.proj.kernel * l_out
                length = l_out
            stage_macs.append(total)
        e = self.exit_point
        return CostProfile(
            macs_prefix=stem_macs + sum(stage_macs[:e]),
            macs_ee_head=self.ee_head.out_dim * self.ee_head.in_dim,
            macs_suffix=sum(stage_macs[e:]),
            macs_fe_head=self.fe_head.out_dim * self.fe_head.in_dim,
        )


def count_macs(model: AmcModel) -> CostProfile:
    return model.count_macs()


def avg_macs(profile: CostProfile, forward_fraction: float, uses_lbap: bool = False) -> float:
    """Average per-sample cost when forward_fraction of samples take the full path."""
    if not 0.0 <= forward_fraction <= 1.0:
        raise ValueError("forward_fraction must be in [0, 1]")
    return profile.exit_cost(uses_lbap) + forward_fraction * (
        profile.macs_suffix + profile.macs_fe_head
    )


# ---------------------------------------------------------------------------
# persistence


def write_manifest(model: AmcModel, path) -> None:
    arch = model.arch
    lines = [
        f"exit_point={model.exit_point}",
        f"stem_channels={arch.stem_channels}",
        f"stage_channels={','.join(str(c) for c in arch.stage_channels)}",
        f"stem_kernel={arch.stem_kernel}",
        f"block_kernel={arch.block_kernel}",
        f"version={model.version}",
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            out[key] = value
    return out


def save_model(model: AmcModel, ck_path, manifest_path) -> None:
    from .nnet.checkpoint import save_params

    save_params(ck_path, model.parameters())
    write_manifest(model, manifest_path)


def load_model(ck_path, manifest_path) -> AmcModel:
    from .nnet.checkpoint import load_params

    man = read_manifest(manifest_path)
    arch = ArchConfig(
        stem_channels=int(man["stem_channels"]),
        stage_channels=tuple(int(c) for c in man["stage_channels"].split(",")),
        stem_kernel=int(man["stem_kernel"]),
        block_kernel=int(man["block_kernel"]),
    )
    model = AmcModel(int(man["exit_point"]), arch)
    model.load_param_dict(load_params(ck_path))
    return model
