"""Minimal reverse-mode-differentiated numerical substrate."""

from .core import (
    Tensor, as_tensor, concat, conv2d, default_dtype, dense, embedding,
    exp, gru_cell, gru_param_shapes, log, log_softmax, relu,
    set_debug_checks, set_default_dtype, sigmoid, softmax,
    softmax_logits_nll, square, tanh,
)
from .optim import (
    CheckpointError, ParamStore, adam_step, clip_global_norm,
    load_checkpoint, save_checkpoint,
)

__all__ = [
    "Tensor", "as_tensor", "concat", "conv2d", "default_dtype", "dense",
    "embedding", "exp", "gru_cell", "gru_param_shapes", "log",
    "log_softmax", "relu", "set_debug_checks", "set_default_dtype",
    "sigmoid", "softmax", "softmax_logits_nll", "square", "tanh",
    "CheckpointError", "ParamStore", "adam_step", "clip_global_norm",
    "load_checkpoint", "save_checkpoint",
]
