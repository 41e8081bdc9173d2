import logging
from typing import Callable

import numpy as np

from motion_transformer.nn.layers import ParamSet
from motion_transformer.nn.tensor import Tensor, backward
from motion_transformer.types import UsageError

logger = logging.getLogger(__name__)


def grad_check(f: Callable[[], Tensor], params: list[ParamSet], eps: float = 1e-5) -> float:
    """Max elementwise relative error between analytic and central-difference gradients.

    f must rebuild its graph from the current parameter values on every call.
    """
    for group in params:
        group.zero_grad()
    loss = f()
    if loss.size != 1:
        raise UsageError(f"grad_check needs a scalar function, got shape {loss.shape}")
    backward(loss)
    worst = 0.0
    for group in params:
        for name, tensor in group.items():
            analytic = tensor.gradient().copy()
            original = tensor.values
            numeric = np.zeros_like(original)
            for idx in np.ndindex(original.shape):
                bumped = original.copy()
                bumped[idx] += eps
                tensor.values = bumped
                up = f().item()
                bumped = original.copy()
                bumped[idx] -= eps
                tensor.values = bumped
                down = f().item()
                numeric[idx] = (up - down) / (2.0 * eps)
            tensor.values = original
            denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-5)
            err = float(np.max(np.abs(analytic - numeric) / denom)) if original.size else 0.0
            if err > worst:
                logger.debug(f"grad_check {group.name}/{name}: rel err {err:.3e}")
            worst = max(worst, err)
    return worst
