"""Differentiable primitives with hand-written backward passes.

Every ``*_forward`` returns ``(out, cache)``; the matching ``*_backward``
takes that cache and the upstream gradient and returns the gradients of the
inputs. Arrays are float64 and may carry leading batch axes; the time axis is
``-2`` and the hidden axis ``-1``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import ndtr

from .errors import ShapeMismatch

LAYER_NORM_EPS = 1e-12
_INV_SQRT_2PI = 0.3989422804014327


# -- wavelet operators ------------------------------------------------------

@lru_cache(maxsize=256)
def _down_matrix(n: int, taps: tuple) -> np.ndarray:
    # out[j] = sum_i f[2j + 1 - i] x[i]
    FL = len(taps)
    m = (n + FL - 1) // 2
    op = np.zeros((m, n))
    for j in range(m):
        for i in range(n):
            k = 2 * j + 1 - i
            if 0 <= k < FL:
                op[j, i] = taps[k]
    op.setflags(write=False)
    return op


@lru_cache(maxsize=256)
def _up_matrix(m: int, taps: tuple, target: int) -> np.ndarray:
    # sample j of the input sits at position 2j of the upsampled signal
    FL = len(taps)
    full = 2 * m - 1 + FL - 1
    if target > full or target < 1:
        raise ShapeMismatch(f"centre window of {target} does not fit in {full} samples")
    offset = (full - target) // 2
    op = np.zeros((target, m))
    for t in range(target):
        for j in range(m):
            k = offset + t - 2 * j
            if 0 <= k < FL:
                op[t, j] = taps[k]
    op.setflags(write=False)
    return op


def down_operator(n: int, f) -> np.ndarray:
    """Dense [floor((n+FL-1)/2) x n] matrix of filter-then-downsample."""
    if n < 1:
        raise ShapeMismatch("signal length must be positive")
    return _down_matrix(int(n), tuple(float(v) for v in f))


def up_operator(m: int, f, target: int) -> np.ndarray:
    """Dense [target x m] matrix of upsample-filter-centerkeep."""
    if m < 1:
        raise ShapeMismatch("coefficient length must be positive")
    return _up_matrix(int(m), tuple(float(v) for v in f), int(target))


def conv_down_forward(x, f):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise ShapeMismatch(f"expected [..., n, d], got shape {x.shape}")
    op = down_operator(x.shape[-2], f)
    return op @ x, op


def conv_down_backward(cache, g):
    op = cache
    if g.shape[-2] != op.shape[0]:
        raise ShapeMismatch(f"upstream gradient has {g.shape[-2]} rows, expected {op.shape[0]}")
    return op.T @ g


def upconv_forward(x, f, target_len: int):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise ShapeMismatch(f"expected [..., m, d], got shape {x.shape}")
    op = up_operator(x.shape[-2], f, target_len)
    return op @ x, op


def upconv_backward(cache, g):
    op = cache
    if g.shape[-2] != op.shape[0]:
        raise ShapeMismatch(f"upstream gradient has {g.shape[-2]} rows, expected {op.shape[0]}")
    return op.T @ g


# -- elementwise ------------------------------------------------------------

def _reduce_to(grad, shape):
    """Sum ``grad`` over the leading axes that were broadcast from ``shape``."""
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    return grad


def elem_mul_forward(a, b):
    """Hadamard product; ``b`` may omit leading batch axes of ``a``."""
    if a.shape[a.ndim - b.ndim:] != b.shape:
        raise ShapeMismatch(f"cannot multiply {a.shape} by {b.shape}")
    return a * b, (a, b)


def elem_mul_backward(cache, g):
    a, b = cache
    return g * b, _reduce_to(g * a, b.shape)


def row_broadcast_scale_forward(a, r):
    """``out[..., i, j] = a[..., i, j] * r[j]**2``."""
    if r.ndim != 1 or a.shape[-1] != r.shape[0]:
        raise ShapeMismatch(f"re-scaler of shape {r.shape} does not match {a.shape}")
    return a * (r * r), (a, r)


def row_broadcast_scale_backward(cache, g):
    a, r = cache
    da = g * (r * r)
    dr = 2.0 * r * (g * a).reshape(-1, r.shape[0]).sum(axis=0)
    return da, dr


def dense_forward(x, W, b):
    if W.ndim != 2 or x.shape[-1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ShapeMismatch(f"dense: x {x.shape}, W {W.shape}, b {b.shape}")
    return x @ W + b, (x, W)


def dense_backward(cache, g):
    x, W = cache
    dx = g @ W.T
    x2 = x.reshape(-1, x.shape[-1])
    g2 = g.reshape(-1, g.shape[-1])
    return dx, x2.T @ g2, g2.sum(axis=0)


def gelu_forward(x):
    """Exact GELU, ``x * Phi(x)``."""
    cdf = ndtr(x)
    return x * cdf, (x, cdf)


def gelu_backward(cache, g):
    x, cdf = cache
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return g * (cdf + x * pdf)


def layer_norm_forward(x, gain, bias, eps: float = LAYER_NORM_EPS):
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeMismatch(f"layer norm over {d} features, got gain {gain.shape}")
    # row means as mat-vec products: much faster than .mean(axis=-1) for small d
    avg = np.full(d, 1.0 / d)
    xc = x - (x @ avg)[..., None]
    inv_std = 1.0 / np.sqrt((xc * xc) @ avg + eps)
    xhat = xc * inv_std[..., None]
    return xhat * gain + bias, (xhat, inv_std, gain)


def layer_norm_backward(cache, g):
    xhat, inv_std, gain = cache
    d = xhat.shape[-1]
    avg = np.full(d, 1.0 / d)
    dxhat = g * gain
    dx = (dxhat - (dxhat @ avg)[..., None] - xhat * ((dxhat * xhat) @ avg)[..., None]) * inv_std[..., None]
    g2 = g.reshape(-1, d)
    dgain = (g2 * xhat.reshape(-1, d)).sum(axis=0)
    return dx, dgain, g2.sum(axis=0)


def dropout_forward(x, rate: float, rng, training: bool):
    """Inverted dropout; the returned cache is the scaled keep-mask (or None)."""
    if not training or rate == 0.0:
        return x, None
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(cache, g):
    return g if cache is None else g * cache


def softmax_ce_forward(scores, labels):
    """Per-row cross-entropy ``-log softmax(scores)[label]``.

    Scores of ``-inf`` (masked items) get probability exactly 0.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape[:-1] != labels.shape:
        raise ShapeMismatch(f"scores {scores.shape} vs labels {labels.shape}")
    shifted = scores - scores.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    total = ex.sum(axis=-1, keepdims=True)
    probs = ex / total
    picked = np.take_along_axis(shifted, labels[..., None], axis=-1)[..., 0]
    loss = np.log(total[..., 0]) - picked
    return loss, (probs, labels)


def softmax_ce_backward(cache, g=1.0):
    probs, labels = cache
    grad = probs.copy()
    np.put_along_axis(
        grad, labels[..., None],
        np.take_along_axis(grad, labels[..., None], axis=-1) - 1.0, axis=-1,
    )
    return grad * np.asarray(g)[..., None]
