"""Differentiable primitives with hand-derived backward passes.

Tensors are plain numpy arrays, (batch, channels, height, width) for feature
maps and (batch, features) for vectors.  Each forward returns (output, cache)
and the matching ``*_backward`` consumes that cache; nothing here keeps
hidden state.  Arithmetic follows the input dtype: float32 for training,
float64 when a test wants finite-difference-grade precision.

Convolution uses cross-correlation semantics (no kernel flip) and is lowered
to one matrix multiply per batch via an im2col view, which is where
essentially all training time goes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "conv2d",
    "conv2d_backward",
    "relu",
    "relu_backward",
    "global_avg_pool",
    "global_avg_pool_backward",
    "fully_connected",
    "fully_connected_backward",
    "softmax_cross_entropy",
    "LossOutput",
    "conv_output_size",
]


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, padding: int):
    n, c, h, w = x.shape
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh = conv_output_size(h, kh, stride, padding)
    ow = conv_output_size(w, kw, stride, padding)
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    # (n, c, oh, ow, kh, kw) -> (n*oh*ow, c*kh*kw)
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)
    return np.ascontiguousarray(cols), oh, ow


def _col2im(grad_cols: np.ndarray, x_shape, kh: int, kw: int, stride: int, padding: int):
    n, c, h, w = x_shape
    hp, wp = h + 2 * padding, w + 2 * padding
    oh = conv_output_size(h, kh, stride, padding)
    ow = conv_output_size(w, kw, stride, padding)
    g = grad_cols.reshape(n, oh, ow, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    gx = np.zeros((n, c, hp, wp), dtype=grad_cols.dtype)
    for i in range(kh):
        for j in range(kw):
            gx[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += g[:, :, i, j]
    if padding:
        gx = gx[:, :, padding : padding + h, padding : padding + w]
    return gx


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1, padding: int = 0):
    """Cross-correlate (n,ci,h,w) with (co,ci,kh,kw) weights; zero padding."""
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError(f"conv2d needs 4-D input and weights, got {x.shape} and {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ValueError(f"channel mismatch: input {x.shape[1]}, weights {w.shape[1]}")
    if b.shape != (w.shape[0],):
        raise ValueError(f"bias shape {b.shape} does not match {w.shape[0]} filters")
    if stride < 1 or padding < 0:
        raise ValueError(f"bad stride/padding: {stride}/{padding}")
    n = x.shape[0]
    co, ci, kh, kw = w.shape
    cols, oh, ow = _im2col(x, kh, kw, stride, padding)
    out = cols @ w.reshape(co, ci * kh * kw).T + b
    out = out.reshape(n, oh, ow, co).transpose(0, 3, 1, 2)
    cache = (cols, x.shape, w, stride, padding)
    return np.ascontiguousarray(out), cache


def conv2d_backward(grad_out: np.ndarray, cache):
    """Gradients for input, weights, and bias of :func:`conv2d`."""
    cols, x_shape, w, stride, padding = cache
    co, ci, kh, kw = w.shape
    n = x_shape[0]
    g = grad_out.transpose(0, 2, 3, 1).reshape(-1, co)
    grad_b = g.sum(axis=0)
    grad_w = (g.T @ cols).reshape(co, ci, kh, kw)
    grad_cols = g @ w.reshape(co, ci * kh * kw)
    grad_x = _col2im(grad_cols, x_shape, kh, kw, stride, padding)
    return grad_x, grad_w, grad_b


def relu(x: np.ndarray):
    out = np.maximum(x, 0)
    return out, (x > 0)


def relu_backward(grad_out: np.ndarray, cache):
    return grad_out * cache


def global_avg_pool(x: np.ndarray):
    """Spatial mean per channel: (n, c, h, w) -> (n, c)."""
    if x.ndim != 4:
        raise ValueError(f"global_avg_pool needs a 4-D input, got {x.shape}")
    return x.mean(axis=(2, 3)), x.shape


def global_avg_pool_backward(grad_out: np.ndarray, cache):
    n, c, h, w = cache
    return np.broadcast_to(grad_out[:, :, None, None], cache) / (h * w)


def fully_connected(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Affine map (n, f) @ (out, f)^T + (out,)."""
    if x.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ValueError(f"feature mismatch: input {x.shape}, weights {w.shape}")
    return x @ w.T + b, (x, w)


def fully_connected_backward(grad_out: np.ndarray, cache):
    x, w = cache
    return grad_out @ w, grad_out.T @ x, grad_out.sum(axis=0)


@dataclass(frozen=True)
class LossOutput:
    """Mean cross-entropy over the batch, with probabilities and logit grads."""

    loss: float
    probs: np.ndarray
    grad_logits: np.ndarray


def softmax_cross_entropy(logits: np.ndarray, targets) -> LossOutput:
    """Mean of -log softmax(logits)[target] over the batch.

    Stabilized by per-row max subtraction; the returned gradient is
    (probs - onehot)/batch, ready to feed the backward pass.
    """
    targets = np.asarray(targets)
    n, c = logits.shape
    if targets.shape != (n,):
        raise ValueError(f"need one target per row: logits {logits.shape}, targets {targets.shape}")
    if targets.min() < 0 or targets.max() >= c:
        raise ValueError(f"targets must lie in [0, {c})")
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsum
    loss = float(-logp[np.arange(n), targets].mean())
    probs = np.exp(logp)
    grad = probs.copy()
    grad[np.arange(n), targets] -= 1.0
    grad /= n
    return LossOutput(loss=loss, probs=probs, grad_logits=grad.astype(logits.dtype, copy=False))
