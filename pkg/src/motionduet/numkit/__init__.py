from .gradcheck import gradcheck
from .optim import Adam
from .ops import (
    abs_,
    add,
    attention,
    concat,
    conv1d,
    cosine,
    div,
    gelu,
    irfft,
    layer_norm,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    rfft,
    softmax,
    softplus,
    spectral_filter,
    stack,
    sub,
    sum_,
    take,
    tanh,
    transpose,
)
from .tensor import Param, Tensor, checked_mode, collect_params, is_checked

__all__ = [
    "Tensor",
    "Param",
    "checked_mode",
    "collect_params",
    "is_checked",
    "gradcheck",
    "Adam",
    "add",
    "sub",
    "mul",
    "div",
    "matmul",
    "attention",
    "rfft",
    "irfft",
    "relu",
    "gelu",
    "tanh",
    "abs_",
    "mean",
    "sum_",
    "softmax",
    "softplus",
    "layer_norm",
    "reshape",
    "transpose",
    "concat",
    "stack",
    "take",
    "conv1d",
    "spectral_filter",
    "cosine",
]
