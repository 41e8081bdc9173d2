from dataclasses import dataclass, field

import numpy as np

from motion_transformer.nn.layers import ParamSet
from motion_transformer.types import UsageError


@dataclass
class AdamState:
    """First and second moments and update counts keyed by '<paramset>/<name>'."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    steps: dict[str, int] = field(default_factory=dict)


def adam_step(
    params: ParamSet,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
    step_index: int | None,
    state: AdamState,
) -> ParamSet:
    """Bias-corrected adaptive-moment update of every parameter holding a gradient.

    With step_index None each parameter is corrected by the number of updates
    it has itself received, so a tensor that sat out some steps is not treated
    as warmed up. An explicit step_index (counting from 1) applies to all of them.
    Parameters whose grad is None are left alone, their moments and counts
    included. Values are replaced, never written in place.
    """
    if step_index is not None and step_index < 1:
        raise UsageError(f"step_index counts from 1, got {step_index}")
    if not lr > 0:
        raise UsageError(f"lr must be > 0, got {lr}")
    for name, tensor in params.items():
        if tensor.grad is None:
            continue
        key = f"{params.name}/{name}"
        count = state.steps.get(key, 0) + 1 if step_index is None else step_index
        g = tensor.grad
        m = beta1 * state.m.get(key, np.zeros_like(g)) + (1.0 - beta1) * g
        v = beta2 * state.v.get(key, np.zeros_like(g)) + (1.0 - beta2) * g * g
        state.m[key] = m
        state.v[key] = v
        state.steps[key] = count
        correction1 = 1.0 - beta1**count
        correction2 = 1.0 - beta2**count
        tensor.values = tensor.values - lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
    return params


class Adam:
    def __init__(self, groups: list[ParamSet], lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        names = [g.name for g in groups]
        if len(set(names)) != len(names):
            raise UsageError(f"Adam parameter groups need unique names, got {names}")
        self.groups = groups
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_index = 0
        self.state = AdamState()

    def zero_grad(self) -> None:
        for group in self.groups:
            group.zero_grad()

    def step(self) -> None:
        self.step_index += 1
        for group in self.groups:
            adam_step(group, self.lr, self.beta1, self.beta2, self.eps, None, self.state)
