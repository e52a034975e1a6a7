"""Compact residual classifier assembled from the primitives in ops.

Layout: 3x3 stem convolution to the first stage width, then stages of
residual blocks (the first block of every stage after the first downsamples
by stride 2 through a 1x1 projection shortcut), global average pooling, and
a fully connected 20-way head.  No batch normalization anywhere: at this
scale He initialization plus Adam trains fine, and checkpoints stay free of
running statistics.

Parameters live in an ordered name -> array mapping whose declaration order
is fixed by :func:`param_shapes`; checkpoints and the optimizer both rely on
that order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ..imgcore import SeededRng
from . import ops

__all__ = [
    "ModelConfig",
    "ModelParams",
    "param_shapes",
    "fingerprint",
    "init_params",
    "residual_block",
    "residual_block_backward",
    "forward",
    "backprop",
]


@dataclass(frozen=True)
class ModelConfig:
    """Architecture description: ((blocks, width), ...) per stage."""

    stages: tuple = ((2, 16), (2, 32), (2, 64))
    input_size: int = 64
    num_classes: int = 20

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple((int(n), int(w)) for n, w in self.stages))
        if not self.stages:
            raise ValueError("need at least one stage")
        if any(n < 1 or w < 1 for n, w in self.stages):
            raise ValueError(f"bad stage layout: {self.stages}")
        if self.num_classes != 20:
            raise ValueError(f"class count is fixed at 20, got {self.num_classes}")
        # every stage after the first halves the spatial size; it must stay >= 1
        if self.input_size < 2 ** (len(self.stages) - 1):
            raise ValueError(f"input size {self.input_size} too small for {len(self.stages)} stages")

    def to_dict(self) -> dict:
        return {
            "stages": [list(s) for s in self.stages],
            "input_size": self.input_size,
            "num_classes": self.num_classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            stages=tuple(tuple(s) for s in d["stages"]),
            input_size=int(d["input_size"]),
            num_classes=int(d["num_classes"]),
        )


def fingerprint(config: ModelConfig) -> str:
    """Short stable digest of the architecture, embedded in checkpoints."""
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def param_shapes(config: ModelConfig) -> dict:
    """Canonical parameter declaration order and shapes for a config."""
    shapes = {}
    width0 = config.stages[0][1]
    shapes["stem.w"] = (width0, 3, 3, 3)
    shapes["stem.b"] = (width0,)
    in_ch = width0
    for s, (blocks, width) in enumerate(config.stages):
        for b in range(blocks):
            stride = 2 if (s > 0 and b == 0) else 1
            prefix = f"s{s}b{b}."
            shapes[prefix + "conv1.w"] = (width, in_ch, 3, 3)
            shapes[prefix + "conv1.b"] = (width,)
            shapes[prefix + "conv2.w"] = (width, width, 3, 3)
            shapes[prefix + "conv2.b"] = (width,)
            if stride != 1 or in_ch != width:
                shapes[prefix + "proj.w"] = (width, in_ch, 1, 1)
                shapes[prefix + "proj.b"] = (width,)
            in_ch = width
    shapes["fc.w"] = (config.num_classes, config.stages[-1][1])
    shapes["fc.b"] = (config.num_classes,)
    return shapes


@dataclass(frozen=True)
class ModelParams:
    """Config, its fingerprint, and the parameter tensors in declaration order."""

    config: ModelConfig
    tensors: dict = field(repr=False)
    fingerprint: str = ""

    def __post_init__(self):
        expected = param_shapes(self.config)
        if list(self.tensors) != list(expected):
            raise ValueError("parameter names do not match the config declaration order")
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ValueError(f"{name}: shape {self.tensors[name].shape}, expected {shape}")
        object.__setattr__(self, "fingerprint", fingerprint(self.config))

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.config, {k: v.astype(dtype) for k, v in self.tensors.items()})


def init_params(config: ModelConfig, rng: SeededRng, dtype=np.float32) -> ModelParams:
    """He-scaled normal weights (std sqrt(2/fan_in)), zero biases."""
    tensors = {}
    for name, shape in param_shapes(config).items():
        if name.endswith(".b"):
            tensors[name] = np.zeros(shape, dtype=dtype)
        else:
            fan_in = int(np.prod(shape[1:]))
            scale = np.sqrt(2.0 / fan_in)
            tensors[name] = (rng.normal(shape) * scale).astype(dtype)
    return ModelParams(config, tensors)


def residual_block(x: np.ndarray, p: dict, prefix: str, stride: int):
    """out = relu(conv->relu->conv + shortcut); projection shortcut if needed."""
    h1, c1 = ops.conv2d(x, p[prefix + "conv1.w"], p[prefix + "conv1.b"], stride=stride, padding=1)
    a1, cr1 = ops.relu(h1)
    h2, c2 = ops.conv2d(a1, p[prefix + "conv2.w"], p[prefix + "conv2.b"], stride=1, padding=1)
    if prefix + "proj.w" in p:
        sc, cp = ops.conv2d(x, p[prefix + "proj.w"], p[prefix + "proj.b"], stride=stride, padding=0)
    else:
        sc, cp = x, None
    out, cr2 = ops.relu(h2 + sc)
    return out, (c1, cr1, c2, cp, cr2, prefix)


def residual_block_backward(grad_out: np.ndarray, cache, grads: dict):
    """Accumulate this block's parameter grads into ``grads``; return grad_x."""
    c1, cr1, c2, cp, cr2, prefix = cache
    gs = ops.relu_backward(grad_out, cr2)
    gx2, gw2, gb2 = ops.conv2d_backward(gs, c2)
    grads[prefix + "conv2.w"] = gw2
    grads[prefix + "conv2.b"] = gb2
    ga1 = ops.relu_backward(gx2, cr1)
    gx1, gw1, gb1 = ops.conv2d_backward(ga1, c1)
    grads[prefix + "conv1.w"] = gw1
    grads[prefix + "conv1.b"] = gb1
    if cp is not None:
        gxp, gwp, gbp = ops.conv2d_backward(gs, cp)
        grads[prefix + "proj.w"] = gwp
        grads[prefix + "proj.b"] = gbp
        return gx1 + gxp
    return gx1 + gs


def _forward_impl(params: ModelParams, x: np.ndarray, want_cache: bool):
    cfg = params.config
    p = params.tensors
    if x.ndim != 4 or x.shape[1] != 3:
        raise ValueError(f"expected a (batch, 3, h, w) input, got {x.shape}")
    if x.shape[2] != cfg.input_size or x.shape[3] != cfg.input_size:
        raise ValueError(f"input is {x.shape[2]}x{x.shape[3]}, model expects {cfg.input_size}x{cfg.input_size}")
    caches = []
    h, c_stem = ops.conv2d(x, p["stem.w"], p["stem.b"], stride=1, padding=1)
    h, cr_stem = ops.relu(h)
    block_caches = []
    for s, (blocks, _width) in enumerate(cfg.stages):
        for b in range(blocks):
            stride = 2 if (s > 0 and b == 0) else 1
            h, cache = residual_block(h, p, f"s{s}b{b}.", stride)
            block_caches.append(cache)
    pooled, c_pool = ops.global_avg_pool(h)
    logits, c_fc = ops.fully_connected(pooled, p["fc.w"], p["fc.b"])
    if not want_cache:
        return logits, None
    return logits, (c_stem, cr_stem, block_caches, c_pool, c_fc)


def forward(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Logits (batch, 20); pure function of (params, x)."""
    logits, _ = _forward_impl(params, x, want_cache=False)
    return logits


def backprop(params: ModelParams, x: np.ndarray, targets) -> tuple:
    """One forward/backward pass: returns (LossOutput, grads by param name)."""
    logits, cache = _forward_impl(params, x, want_cache=True)
    loss_out = ops.softmax_cross_entropy(logits, targets)
    c_stem, cr_stem, block_caches, c_pool, c_fc = cache
    grads = {}
    g, grads["fc.w"], grads["fc.b"] = ops.fully_connected_backward(loss_out.grad_logits, c_fc)
    g = ops.global_avg_pool_backward(g, c_pool)
    cfg = params.config
    flat = [(s, b) for s, (blocks, _w) in enumerate(cfg.stages) for b in range(blocks)]
    for (s, b), cache_b in zip(reversed(flat), reversed(block_caches)):
        g = residual_block_backward(g, cache_b, grads)
    g = ops.relu_backward(g, cr_stem)
    _, grads["stem.w"], grads["stem.b"] = ops.conv2d_backward(g, c_stem)
    ordered = {name: grads[name] for name in params.tensors}
    return loss_out, ordered
