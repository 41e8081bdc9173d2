import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import expit

from motion_transformer.nn.tensor import Tensor, _node, concat, getitem, matmul, pad_time, reshape, stack
from motion_transformer.types import NumericError, UsageError


class ParamSet:
    """Named trainable tensors of one network."""

    def __init__(self, name: str = ""):
        self.name = name
        self._params: dict[str, Tensor] = {}

    def __repr__(self) -> str:
        return f"ParamSet({self.name!r}, {len(self._params)} tensors, {self.num_params} values)"

    def __contains__(self, key: str) -> bool:
        return key in self._params

    def __getitem__(self, key: str) -> Tensor:
        if key not in self._params:
            raise UsageError(f"ParamSet {self.name!r} has no parameter '{key}'")
        return self._params[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def add(self, key: str, values: np.ndarray) -> Tensor:
        if key in self._params:
            raise UsageError(f"Duplicate parameter name '{key}' in {self.name!r}")
        tensor = Tensor(np.array(values, dtype=np.float64), requires_grad=True, name=f"{self.name}/{key}")
        self._params[key] = tensor
        return tensor

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._params.items())

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    @property
    def num_params(self) -> int:
        return sum(t.size for t in self._params.values())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: t.values.copy() for k, t in self._params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        if set(arrays) != set(self._params):
            raise UsageError(f"Parameter names differ for {self.name!r}: {sorted(set(arrays) ^ set(self._params))}")
        for k, values in arrays.items():
            current = self._params[k]
            if tuple(values.shape) != current.shape:
                raise UsageError(f"Shape mismatch for {self.name}/{k}: {values.shape} vs {current.shape}")
            current.values = np.array(values, dtype=np.float64)
            current.grad = None

    def copy(self) -> "ParamSet":
        out = ParamSet(self.name)
        for k, t in self._params.items():
            out.add(k, t.values)
        return out


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(max(fan, 1))
    return rng.uniform(-bound, bound, size=shape)


def add_linear(params: ParamSet, prefix: str, n_in: int, n_out: int, rng: np.random.Generator) -> None:
    params.add(f"{prefix}.W", uniform_init(rng, (n_in, n_out), n_in))
    params.add(f"{prefix}.b", uniform_init(rng, (n_out,), n_in))


def add_conv1d(params: ParamSet, prefix: str, c_in: int, c_out: int, kernel: int, rng: np.random.Generator) -> None:
    add_linear(params, prefix, kernel * c_in, c_out, rng)


def add_gru(params: ParamSet, prefix: str, n_in: int, hidden: int, rng: np.random.Generator) -> None:
    """Gate order in the stacked matrices is reset, update, candidate."""
    params.add(f"{prefix}.Wx", uniform_init(rng, (n_in, 3 * hidden), hidden))
    params.add(f"{prefix}.Wh", uniform_init(rng, (hidden, 3 * hidden), hidden))
    params.add(f"{prefix}.bx", uniform_init(rng, (3 * hidden,), hidden))
    params.add(f"{prefix}.bh", uniform_init(rng, (3 * hidden,), hidden))


def linear(x: Tensor, params: ParamSet, prefix: str) -> Tensor:
    return matmul(x, params[f"{prefix}.W"]) + params[f"{prefix}.b"]


def conv1d(x: Tensor, params: ParamSet, prefix: str, kernel: int = 3, stride: int = 2, padding: int = 1) -> Tensor:
    """(B, L, C) -> (B, L_out, C_out) with L_out = (L + 2*padding - kernel) // stride + 1."""
    if x.ndim != 3:
        raise UsageError(f"conv1d expects (B, L, C), got {x.shape}")
    batch, length, channels = x.shape
    out_len = (length + 2 * padding - kernel) // stride + 1
    if out_len < 1:
        raise UsageError(f"conv1d: sequence of length {length} is too short for kernel {kernel}")
    taps = np.arange(out_len)[:, None] * stride + np.arange(kernel)[None, :]
    windows = getitem(pad_time(x, padding), (slice(None), taps))
    flat = reshape(windows, (batch, out_len, kernel * channels))
    return linear(flat, params, prefix)


@dataclass(frozen=True)
class GruState:
    h: Tensor

    def __post_init__(self):
        if not np.all(np.isfinite(self.h.values)):
            raise NumericError("GRU state went non-finite")


def gru_step(x: Tensor, h: Tensor, wx: Tensor, wh: Tensor, bx: Tensor, bh: Tensor) -> Tensor:
    """One GRU update on (B, I) inputs and (B, H) state.

    r = sigmoid(x Wx_r + bx_r + h Wh_r + bh_r)
    z = sigmoid(x Wx_z + bx_z + h Wh_z + bh_z)
    n = tanh(x Wx_n + bx_n + r * (h Wh_n + bh_n))
    h' = (1 - z) * n + z * h
    """
    hidden = h.shape[-1]
    if wx.shape != (x.shape[-1], 3 * hidden) or wh.shape != (hidden, 3 * hidden):
        raise UsageError(f"gru_step: input {x.shape}, state {h.shape} do not fit weights {wx.shape}, {wh.shape}")
    gx = x.values @ wx.values + bx.values
    gh = h.values @ wh.values + bh.values
    r = expit(gx[:, :hidden] + gh[:, :hidden])
    z = expit(gx[:, hidden : 2 * hidden] + gh[:, hidden : 2 * hidden])
    gh_n = gh[:, 2 * hidden :]
    n = np.tanh(gx[:, 2 * hidden :] + r * gh_n)
    out = (1.0 - z) * n + z * h.values

    def grad_fn(g: np.ndarray):
        dn = g * (1.0 - z) * (1.0 - n * n)
        dz = g * (h.values - n) * z * (1.0 - z)
        dr = dn * gh_n * r * (1.0 - r)
        dgx = np.concatenate([dr, dz, dn], axis=1)
        dgh = np.concatenate([dr, dz, dn * r], axis=1)
        dx = dgx @ wx.values.T
        dh = g * z + dgh @ wh.values.T
        return dx, dh, x.values.T @ dgx, h.values.T @ dgh, dgx.sum(axis=0), dgh.sum(axis=0)

    return _node(out, (x, h, wx, wh, bx, bh), grad_fn, "gru_step")


def gru_cell(x: Tensor, state: GruState, params: ParamSet, prefix: str) -> GruState:
    h = gru_step(x, state.h, params[f"{prefix}.Wx"], params[f"{prefix}.Wh"], params[f"{prefix}.bx"], params[f"{prefix}.bh"])
    return GruState(h)


def gru_sequence(x: Tensor, params: ParamSet, prefix: str, reverse: bool = False, h0: Tensor | None = None) -> tuple[Tensor, Tensor]:
    """Run a GRU over (B, L, I); returns all states (B, L, H) in input order and the final state."""
    if x.ndim != 3:
        raise UsageError(f"gru_sequence expects (B, L, I), got {x.shape}")
    batch, length, _ = x.shape
    hidden = params[f"{prefix}.Wh"].shape[0]
    state = GruState(h0 if h0 is not None else Tensor(np.zeros((batch, hidden))))
    steps = range(length - 1, -1, -1) if reverse else range(length)
    outputs: list[Tensor] = []
    for t in steps:
        state = gru_cell(getitem(x, (slice(None), t, slice(None))), state, params, prefix)
        outputs.append(state.h)
    if reverse:
        outputs.reverse()
    return stack(outputs, axis=1), state.h


def bidirectional_gru(x: Tensor, params: ParamSet, forward_prefix: str, backward_prefix: str) -> Tensor:
    fwd, _ = gru_sequence(x, params, forward_prefix)
    bwd, _ = gru_sequence(x, params, backward_prefix, reverse=True)
    return concat([fwd, bwd], axis=-1)

