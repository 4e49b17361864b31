"""Shared test utilities for the network modules."""

from __future__ import annotations

import numpy as np

from pageseg import fcn


def naive_conv(x, weights, bias):
    """Six-nested-loop same-padded convolution, the reference semantics."""
    b, c_in, h, w = x.shape
    c_out, _, k, _ = weights.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros((b, c_out, h, w))
    for bi in range(b):
        for co in range(c_out):
            for i in range(h):
                for j in range(w):
                    acc = bias[co]
                    for ci in range(c_in):
                        for u in range(k):
                            for v in range(k):
                                acc += weights[co, ci, u, v] * xp[bi, ci, i + u, j + v]
                    out[bi, co, i, j] = acc
    return out


def kink_free_model(base_channels: int, x: np.ndarray, seed: int = 0, margin: float = 0.5):
    """A model whose rectifier inputs all sit at least `margin` from zero.

    Central finite differences measure nothing at a ReLU kink, so gradient
    checks run at a point where every rectifier keeps a fixed sign across
    the probe interval.  Biases are set per channel so even channels are
    active everywhere and odd channels are dead everywhere; dead channels
    still verify that backpropagation masks them (their gradients must be
    exactly zero, and finite differences confirm it).
    """
    model = fcn.init_model(base_channels=base_channels, seed=seed)

    def set_biases(layer, pre):
        for c in range(layer.weights.shape[0]):
            if c % 2 == 0:
                layer.bias[c] = margin - pre[:, c].min()
            else:
                layer.bias[c] = -margin - pre[:, c].max()

    inp = x
    for s, branch in enumerate(model.scale_branches):
        cur = inp
        for li, layer in enumerate(branch):
            pre = fcn._conv_forward(cur, layer.weights, np.zeros_like(layer.bias))
            set_biases(layer, pre)
            cur = np.maximum(pre + layer.bias[None, :, None, None], 0.0)
            if li == 0 and s + 1 < len(model.scale_branches):
                inp = fcn.avg_pool_2x2(cur)
    trace = fcn._forward_trace(model, x)
    pre = fcn._conv_forward(trace.cat, model.head[0].weights, np.zeros_like(model.head[0].bias))
    set_biases(model.head[0], pre)
    return model


def nll(model, x, target) -> float:
    """Mean negative log-likelihood from the public forward pass."""
    page = fcn.forward(model, x)
    target = np.asarray(target, dtype=bool)
    if target.ndim == 2:
        target = target[None]
    p_true = np.where(target, page, 1.0 - page)
    return float(-np.log(np.clip(p_true, 1e-300, None)).mean())


def layer_names(model) -> list[str]:
    names = []
    for bi, branch in enumerate(model.scale_branches):
        for li in range(len(branch)):
            names.append(f"branch{bi}.layer{li}")
    names += ["head0", "head1"]
    return names
