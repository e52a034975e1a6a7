"""Minimal tensor engine: hand-derived gradients, residual nets, Adam."""

from .adam import AdamState, adam_step, init_adam
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .model import (
    ModelConfig,
    ModelParams,
    backprop,
    fingerprint,
    forward,
    init_params,
    param_shapes,
    residual_block,
    residual_block_backward,
)
from .ops import (
    LossOutput,
    conv2d,
    conv2d_backward,
    conv_output_size,
    fully_connected,
    fully_connected_backward,
    global_avg_pool,
    global_avg_pool_backward,
    relu,
    relu_backward,
    softmax_cross_entropy,
)

__all__ = [
    "AdamState",
    "adam_step",
    "init_adam",
    "CheckpointError",
    "load_checkpoint",
    "save_checkpoint",
    "ModelConfig",
    "ModelParams",
    "backprop",
    "fingerprint",
    "forward",
    "init_params",
    "param_shapes",
    "residual_block",
    "residual_block_backward",
    "LossOutput",
    "conv2d",
    "conv2d_backward",
    "conv_output_size",
    "fully_connected",
    "fully_connected_backward",
    "global_avg_pool",
    "global_avg_pool_backward",
    "relu",
    "relu_backward",
    "softmax_cross_entropy",
]
