"""Pure numpy fallback for the hot kernels.

Mirrors the surface of the compiled extension ``_fastloops``: vectorized
value/gradient evaluation for the builtin landscapes and the full-batch
forward/backward pass of the two-layer tanh classifier. The fused trajectory
loops have no pure counterpart here; without the extension the driver runs
its generic per-step path.
"""

from __future__ import annotations

import numpy as np

from .landscape import (
    KIND_DOUBLE_WELL1D,
    KIND_QUADRATIC,
    KIND_QUARTIC1D,
    KIND_SYNTHETIC2D,
)

BACKEND = "python"

# fused loops are unavailable in the fallback
run_builtin = None
run_mlp = None


def batch_value_grad(kind: int, params: np.ndarray, pts: np.ndarray):
    if kind == KIND_QUARTIC1D:
        t = pts[:, 0]
        vals = (t * (t - 2.0)) ** 2
        grads = (4.0 * t * (t - 1.0) * (t - 2.0))[:, None]
        return vals, grads
    if kind == KIND_DOUBLE_WELL1D:
        a = params[0]
        t = pts[:, 0]
        w = t * t - a * a
        return w * w, (4.0 * t * w)[:, None]
    if kind == KIND_QUADRATIC:
        d = pts.shape[1]
        A = params[: d * d].reshape(d, d)
        b = params[d * d :]
        g = pts @ A.T + b
        vals = 0.5 * np.einsum("ij,ij->i", pts, pts @ A.T) + pts @ b
        return vals, g
    if kind == KIND_SYNTHETIC2D:
        return _synthetic2d_batch(pts)
    raise ValueError(f"unknown kernel kind {kind}")


def _window_x(x):
    w = 0.5 * (1.0 - np.cos(np.pi * (x + 1.0)))
    w = np.where(x <= -1.0, 0.0, np.where(x >= 0.0, 1.0, w))
    wd = 0.5 * np.pi * np.sin(np.pi * (x + 1.0))
    wd = np.where((x > -1.0) & (x < 0.0), wd, 0.0)
    return w, wd


def _window_y(y):
    a = np.abs(y)
    w = 0.5 * (1.0 + np.cos(np.pi * (a - 0.6) / 5.0))
    w = np.where(a <= 0.6, 1.0, np.where(a >= 5.6, 0.0, w))
    wd = -0.1 * np.pi * np.sin(np.pi * (a - 0.6) / 5.0) * np.sign(y)
    wd = np.where((a > 0.6) & (a < 5.6), wd, 0.0)
    return w, wd


def _synthetic2d_batch(pts):
    x, y = pts[:, 0], pts[:, 1]
    e1 = np.exp(-(x * x + y * y) / 6.25)
    wx, wxd = _window_x(x)
    s = x + 1.55 * np.cos(y / 1.5)
    e2 = np.exp(-s * s)
    wy, wyd = _window_y(y)
    ds_dy = -1.55 * np.sin(y / 1.5) / 1.5
    vals = 0.8 * e1 * wx - e2 * wy + 1.0
    gx = 0.8 * e1 * (wxd - (2.0 * x / 6.25) * wx) + 2.0 * s * e2 * wy
    gy = 0.8 * e1 * (-(2.0 * y / 6.25)) * wx + 2.0 * s * e2 * ds_dy * wy - e2 * wyd
    return vals, np.column_stack([gx, gy])


# ---------------------------------------------------------------------------
# two-layer tanh classifier, mean cross-entropy over the batch


def unpack_mlp(theta, n_in, n_hidden, n_classes):
    o = n_hidden * n_in
    w1 = theta[:o].reshape(n_hidden, n_in)
    b1 = theta[o : o + n_hidden]
    o += n_hidden
    w2 = theta[o : o + n_classes * n_hidden].reshape(n_classes, n_hidden)
    o += n_classes * n_hidden
    b2 = theta[o:]
    return w1, b1, w2, b2


def mlp_value_grad(theta, x, labels, n_in, n_hidden, n_classes, want_grad=True):
    w1, b1, w2, b2 = unpack_mlp(theta, n_in, n_hidden, n_classes)
    n = x.shape[0]
    a1 = np.tanh(x @ w1.T + b1)
    z2 = a1 @ w2.T + b2
    z2 = z2 - z2.max(axis=1, keepdims=True)
    expz = np.exp(z2)
    denom = expz.sum(axis=1)
    rows = np.arange(n)
    loss = float(np.mean(np.log(denom) - z2[rows, labels]))
    if not want_grad:
        return loss, None
    d2 = expz / denom[:, None]
    d2[rows, labels] -= 1.0
    d2 /= n
    g_w2 = d2.T @ a1
    g_b2 = d2.sum(axis=0)
    d1 = (d2 @ w2) * (1.0 - a1 * a1)
    g_w1 = d1.T @ x
    g_b1 = d1.sum(axis=0)
    grad = np.concatenate([g_w1.ravel(), g_b1, g_w2.ravel(), g_b2])
    return loss, grad


def mlp_probs(theta, x, n_in, n_hidden, n_classes):
    w1, b1, w2, b2 = unpack_mlp(theta, n_in, n_hidden, n_classes)
    a1 = np.tanh(x @ w1.T + b1)
    z2 = a1 @ w2.T + b2
    z2 = z2 - z2.max(axis=1, keepdims=True)
    expz = np.exp(z2)
    return expz / expz.sum(axis=1, keepdims=True)
