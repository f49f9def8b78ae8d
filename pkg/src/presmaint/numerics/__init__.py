from .gradcheck import max_relative_error, numeric_gradients
from .optim import AdamState, adam_step, collect_grads, sgd_step, zero_grads
from .rng import substream
from .tensor import (
    NonFiniteError,
    ShapeError,
    Tape,
    Tensor,
    absolute,
    add,
    concat,
    div,
    dropout,
    exp,
    layer_norm,
    log,
    log_softmax_rows,
    matmul,
    mean_all,
    mean_axis,
    mul,
    relu,
    scale,
    sigmoid,
    softmax_rows,
    sub,
    sum_all,
    sum_axis,
    take_per_row,
    tanh,
    tensor,
    transpose,
    zeros,
)

__all__ = [
    "AdamState",
    "NonFiniteError",
    "ShapeError",
    "Tape",
    "Tensor",
    "absolute",
    "adam_step",
    "add",
    "collect_grads",
    "concat",
    "div",
    "dropout",
    "exp",
    "layer_norm",
    "log",
    "log_softmax_rows",
    "matmul",
    "max_relative_error",
    "mean_all",
    "mean_axis",
    "mul",
    "numeric_gradients",
    "relu",
    "scale",
    "sgd_step",
    "sigmoid",
    "softmax_rows",
    "sub",
    "substream",
    "sum_all",
    "sum_axis",
    "take_per_row",
    "tanh",
    "tensor",
    "transpose",
    "zero_grads",
    "zeros",
]
