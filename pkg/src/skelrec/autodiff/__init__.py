"""From-scratch reverse-mode autodiff: tensors, ops, Adam, grad checking."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .optim import Adam
from .tensor import (
    ShapeError,
    Tensor,
    add,
    broadcast_to,
    concat,
    conv2d,
    cross_entropy,
    dropout,
    gelu,
    index_select,
    layer_norm,
    matmul,
    maxpool2d,
    mul,
    patchify,
    relu,
    reshape,
    softmax,
    tensor_mean,
    tensor_sum,
    transpose,
)

__all__ = [
    "Adam",
    "CheckpointError",
    "GradCheckReport",
    "ShapeError",
    "Tensor",
    "add",
    "broadcast_to",
    "concat",
    "conv2d",
    "cross_entropy",
    "dropout",
    "gelu",
    "grad_check",
    "index_select",
    "layer_norm",
    "load_checkpoint",
    "matmul",
    "maxpool2d",
    "mul",
    "patchify",
    "relu",
    "reshape",
    "save_checkpoint",
    "softmax",
    "tensor_mean",
    "tensor_sum",
    "transpose",
]
