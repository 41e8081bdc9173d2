from .checkpoint import FORMAT_VERSION, load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .layers import (
    GruState,
    ParamSet,
    add_conv1d,
    add_gru,
    add_linear,
    bidirectional_gru,
    conv1d,
    gru_cell,
    gru_sequence,
    gru_step,
    linear,
)
from .optim import Adam, AdamState, adam_step
from .tensor import (
    Tensor,
    add,
    as_tensor,
    backward,
    bce_with_logits,
    concat,
    getitem,
    is_grad_enabled,
    lsq,
    matmul,
    mean,
    mse,
    mul,
    neg,
    no_grad,
    pad_time,
    relu,
    reshape,
    sigmoid,
    softplus,
    stack,
    sub,
    sum_,
    tanh,
)

__all__ = [
    "FORMAT_VERSION",
    "Adam",
    "AdamState",
    "GruState",
    "ParamSet",
    "Tensor",
    "adam_step",
    "add",
    "add_conv1d",
    "add_gru",
    "add_linear",
    "as_tensor",
    "backward",
    "bce_with_logits",
    "bidirectional_gru",
    "concat",
    "conv1d",
    "getitem",
    "grad_check",
    "gru_cell",
    "gru_sequence",
    "gru_step",
    "is_grad_enabled",
    "linear",
    "load_checkpoint",
    "lsq",
    "matmul",
    "mean",
    "mse",
    "mul",
    "neg",
    "no_grad",
    "pad_time",
    "relu",
    "reshape",
    "save_checkpoint",
    "sigmoid",
    "softplus",
    "stack",
    "sub",
    "sum_",
    "tanh",
]
