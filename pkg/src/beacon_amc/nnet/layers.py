"""Dense and temporal-convolution layers with hand-written backward passes.

All layers operate on leading-batch arrays: (n, features) for Dense,
(n, channels, length) for Conv1d. forward() caches what backward() needs;
backward() stores parameter gradients on the layer and returns the input
gradient.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def he_init(rng, shape, fan_in, dtype=np.float32):
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


def relu(x):
    return np.maximum(x, 0.0)


def softmax(z):
    """Row-wise softmax with max-subtraction; output rows sum to 1."""
    z = np.asarray(z)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(s):
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    es = np.exp(s[~pos])
    out[~pos] = es / (1.0 + es)
    if out.ndim == 0:
        return float(out)
    return out


class Dense:
    """Fully connected layer, y = x @ W.T + b."""

    def __init__(self, in_dim, out_dim, rng=None, dtype=np.float32):
        if rng is None:
            self.weight = np.zeros((out_dim, in_dim), dtype=dtype)
        else:
            self.weight = he_init(rng, (out_dim, in_dim), in_dim, dtype)
        self.bias = np.zeros(out_dim, dtype=dtype)
        self.grad_weight = None
        self.grad_bias = None
        self._x = None

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]

    def forward(self, x):
        x = np.asarray(x)
        if x.shape[-1] != self.in_dim:
            raise ValueError(f"expected {self.in_dim} input features, got {x.shape[-1]}")
        self._x = x
        return x @ self.weight.T + self.bias

    def backward(self, grad_out):
        grad_out = np.asarray(grad_out)
        self.grad_weight = grad_out.T @ self._x
        self.grad_bias = grad_out.sum(axis=0)
        return grad_out @ self.weight


class Conv1d:
    """Temporal convolution (cross-correlation) over (n, in_ch, L) inputs.

    pad=None means same-length padding for stride 1, which requires an odd
    kernel. Output length is floor((L + 2*pad - k) / stride) + 1.
    """

    def __init__(self, in_ch, out_ch, kernel, stride=1, pad=None, rng=None, dtype=np.float32):
        if pad is None:
            if kernel % 2 == 0:
                raise ValueError("same-padding requires an odd kernel")
            pad = (kernel - 1) // 2
        if rng is None:
            self.weight = np.zeros((out_ch, in_ch, kernel), dtype=dtype)
        else:
            self.weight = he_init(rng, (out_ch, in_ch, kernel), in_ch * kernel, dtype)
        self.bias = np.zeros(out_ch, dtype=dtype)
        self.stride = int(stride)
        self.pad = int(pad)
        self.grad_weight = None
        self.grad_bias = None
        self._col = None
        self._in_shape = None

    @property
    def in_ch(self):
        return self.weight.shape[1]

    @property
    def out_ch(self):
        return self.weight.shape[0]

    @property
    def kernel(self):
        return self.weight.shape[2]

    def out_len(self, length):
        return (length + 2 * self.pad - self.kernel) // self.stride + 1

    def forward(self, x):
        x = np.asarray(x)
        n, c, length = x.shape
        if c != self.in_ch:
            raise ValueError(f"expected {self.in_ch} input channels, got {c}")
        if length + 2 * self.pad < self.kernel:
            raise ValueError("input shorter than kernel")
        xp = np.pad(x, ((0, 0), (0, 0), (self.pad, self.pad))) if self.pad else x
        win = sliding_window_view(xp, self.kernel, axis=2)[:, :, :: self.stride]
        l_out = win.shape[2]
        # im2col: (n, l_out, in_ch * k) so the contraction is one matmul
        col = np.ascontiguousarray(win.transpose(0, 2, 1, 3)).reshape(n, l_out, c * self.kernel)
        self._col = col
        self._in_shape = x.shape
        w2 = self.weight.reshape(self.out_ch, -1)
        y = col @ w2.T + self.bias
        return y.transpose(0, 2, 1)

    def backward(self, grad_out):
        n, _, l_out = grad_out.shape
        go = np.ascontiguousarray(grad_out.transpose(0, 2, 1))  # (n, l_out, out_ch)
        col = self._col
        gw2 = np.tensordot(go, col, axes=([0, 1], [0, 1]))  # (out_ch, in_ch*k)
        self.grad_weight = gw2.reshape(self.weight.shape)
        self.grad_bias = go.sum(axis=(0, 1))
        gcol = go @ self.weight.reshape(self.out_ch, -1)  # (n, l_out, in_ch*k)
        gcol = gcol.reshape(n, l_out, self.in_ch, self.kernel).transpose(0, 2, 1, 3)
        _, c, length = self._in_shape
        gxp = np.zeros((n, c, length + 2 * self.pad), dtype=grad_out.dtype)
        for j in range(self.kernel):
            gxp[:, :, j : j + self.stride * l_out : self.stride] += gcol[:, :, :, j]
        if self.pad:
            return gxp[:, :, self.pad : self.pad + length]
        return gxp


class Dropout:
    """Inverted dropout: scaled mask at train time, identity at inference."""

    def __init__(self, rate):
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        self.rate = float(rate)
        self._mask = None

    def forward(self, x, rng=None, training=False):
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.rate
        self._mask = (rng.random(x.shape) >= self.rate).astype(x.dtype) / keep
        return x * self._mask

    def backward(self, grad_out):
        if self._mask is None:
            return grad_out
        return grad_out * self._mask
