"""Dense tensors with reverse-mode autodiff and AdamW."""

from . import functional
from .core import Tensor, as_tensor, backward, graph_nodes, is_grad_enabled, no_grad
from .functional import (
    cross_entropy_logits,
    binary_cross_entropy_logits,
    gelu,
    layer_norm,
    matmul,
    softmax,
)
from .optim import OptimizerState, adamw_step

__all__ = [
    "Tensor",
    "as_tensor",
    "backward",
    "graph_nodes",
    "no_grad",
    "is_grad_enabled",
    "functional",
    "matmul",
    "softmax",
    "layer_norm",
    "gelu",
    "cross_entropy_logits",
    "binary_cross_entropy_logits",
    "OptimizerState",
    "adamw_step",
]
