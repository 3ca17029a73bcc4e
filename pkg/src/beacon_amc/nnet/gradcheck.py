"""Central finite-difference verification of analytic gradients.

Fragments are checked in float64: a scalar objective is built from the layer
output through a fixed random linear functional, the layer's backward pass
supplies the analytic gradients, and every parameter entry is perturbed
symmetrically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import Conv1d, Dense


@dataclass
class GradcheckReport:
    max_rel_err: float
    worst_param: str
    n_checked: int

    def passed(self, tolerance: float = 1e-3) -> bool:
        return self.max_rel_err < tolerance


def gradcheck(loss_fn, params, analytic, step=1e-4) -> GradcheckReport:
    """Compare analytic gradients against central differences of loss_fn.

    loss_fn() must evaluate the scalar objective from the current contents of
    the (float64) arrays in params; analytic maps the same names to gradient
    arrays.
    """
    worst = 0.0
    worst_name = ""
    n_checked = 0
    for name, p in params.items():
        if p.dtype != np.float64:
            raise ValueError("gradcheck requires float64 parameters")
        a = analytic[name]
        flat = p.ravel()
        a_flat = np.asarray(a, dtype=np.float64).ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lp = loss_fn()
            flat[i] = orig - step
            lm = loss_fn()
            flat[i] = orig
            numeric = (lp - lm) / (2.0 * step)
            rel = abs(a_flat[i] - numeric) / max(abs(a_flat[i]), abs(numeric), 1e-8)
            n_checked += 1
            if rel > worst:
                worst = rel
                worst_name = name
    return GradcheckReport(worst, worst_name, n_checked)


def _linear_objective(rng, shape):
    return rng.standard_normal(shape)


def gradcheck_dense(in_dim=4, out_dim=3, n=5, seed=0, step=1e-4) -> GradcheckReport:
    rng = np.random.default_rng(seed)
    layer = Dense(in_dim, out_dim, rng=rng, dtype=np.float64)
    x = rng.standard_normal((n, in_dim))
    r = _linear_objective(rng, (n, out_dim))

    def loss():
        return float((layer.forward(x) * r).sum())

    loss()
    layer.backward(r)
    params = {"weight": layer.weight, "bias": layer.bias}
    analytic = {"weight": layer.grad_weight, "bias": layer.grad_bias}
    return gradcheck(loss, params, analytic, step)


def gradcheck_conv1d(in_ch=2, out_ch=4, kernel=7, length=16, stride=1, n=3, seed=0, step=1e-4) -> GradcheckReport:
    rng = np.random.default_rng(seed)
    layer = Conv1d(in_ch, out_ch, kernel, stride=stride, rng=rng, dtype=np.float64)
    x = rng.standard_normal((n, in_ch, length))
    r = _linear_objective(rng, (n, out_ch, layer.out_len(length)))

    def loss():
        return float((layer.forward(x) * r).sum())

    loss()
    layer.backward(r)
    params = {"weight": layer.weight, "bias": layer.bias}
    analytic = {"weight": layer.grad_weight, "bias": layer.grad_bias}
    return gradcheck(loss, params, analytic, step)
