"""
Reverse-mode automatic differentiation over float64 numpy arrays.

Every op builds its result with `_node`, recording the parents and a closure
that maps the output gradient onto one gradient per parent. `backward` walks
the graph in reverse topological order and accumulates into leaf `.grad`.
The graph is rebuilt on every forward pass.
"""

import threading
from contextlib import contextmanager
from typing import Any, Callable, Iterator, Sequence

import numpy as np
from scipy.special import expit

from motion_transformer.types import UsageError

GradFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_grad_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_grad_state, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording on the current thread."""
    previous = is_grad_enabled()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = previous


class Tensor:
    def __init__(
        self,
        values: Any,
        requires_grad: bool = False,
        name: str = "",
        _parents: tuple["Tensor", ...] = (),
        _grad_fn: GradFn | None = None,
        op: str = "",
    ):
        self.values: np.ndarray = np.asarray(values, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self.op = op
        self._parents = _parents
        self._grad_fn = _grad_fn

    def __repr__(self) -> str:
        label = self.name or self.op or "const"
        return f"Tensor({label}, shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.values.shape)

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def is_leaf(self) -> bool:
        return self._grad_fn is None

    def item(self) -> float:
        if self.size != 1:
            raise UsageError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.values.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.values.copy()

    def gradient(self) -> np.ndarray:
        """Accumulated gradient, zeros when backward never reached this tensor."""
        return np.zeros_like(self.values) if self.grad is None else self.grad

    def detach(self) -> "Tensor":
        return Tensor(self.values)

    def __add__(self, other: Any) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: Any) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: Any) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: Any) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: float) -> "Tensor":
        if isinstance(other, Tensor):
            raise UsageError("Division by a tensor is not supported")
        return mul(self, 1.0 / float(other))

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index: Any) -> "Tensor":
        return getitem(self, index)

    def reshape(self, *shape: int) -> "Tensor":
        return reshape(self, shape)

    def sum(self, axis: int | None = None) -> "Tensor":
        return sum_(self, axis)

    def mean(self, axis: int | None = None) -> "Tensor":
        return mean(self, axis)


def as_tensor(value: Any) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _node(values: np.ndarray, parents: Sequence[Tensor], grad_fn: GradFn, op: str) -> Tensor:
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        return Tensor(values, requires_grad=True, _parents=tuple(parents), _grad_fn=grad_fn, op=op)
    return Tensor(values, op=op)


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> None:
    sa, sb = a.shape, b.shape
    if sa == sb or a.size == 1 or b.size == 1:
        return
    short, long_ = (sa, sb) if len(sa) <= len(sb) else (sb, sa)
    if long_[len(long_) - len(short) :] == short:
        return
    raise UsageError(f"{op}: incompatible shapes {sa} and {sb}")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    if int(np.prod(shape)) == 1:
        return np.asarray(grad.sum()).reshape(shape)
    lead = grad.ndim - len(shape)
    return grad.sum(axis=tuple(range(lead))).reshape(shape)


def add(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)

    def grad_fn(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(a.values + b.values, (a, b), grad_fn, "add")


def sub(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)

    def grad_fn(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _node(a.values - b.values, (a, b), grad_fn, "sub")


def mul(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)

    def grad_fn(g: np.ndarray):
        return _unbroadcast(g * b.values, a.shape), _unbroadcast(g * a.values, b.shape)

    return _node(a.values * b.values, (a, b), grad_fn, "mul")


def neg(a: Tensor) -> Tensor:
    return _node(-a.values, (a,), lambda g: (-g,), "neg")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """(..., K) @ (K, M) -> (..., M)."""
    if a.ndim < 1 or b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise UsageError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    k, m = b.shape

    def grad_fn(g: np.ndarray):
        ga = g @ b.values.T
        gb = a.values.reshape(-1, k).T @ g.reshape(-1, m)
        return ga, gb

    return _node(a.values @ b.values, (a, b), grad_fn, "matmul")


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.values)
    return _node(y, (a,), lambda g: (g * (1.0 - y * y),), "tanh")


def sigmoid(a: Tensor) -> Tensor:
    y = expit(a.values)
    return _node(y, (a,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def relu(a: Tensor) -> Tensor:
    mask = a.values > 0
    return _node(np.where(mask, a.values, 0.0), (a,), lambda g: (g * mask,), "relu")


def softplus(a: Tensor) -> Tensor:
    y = np.logaddexp(0.0, a.values)
    return _node(y, (a,), lambda g: (g * expit(a.values),), "softplus")


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    original = a.shape
    try:
        values = a.values.reshape(tuple(shape))
    except ValueError as e:
        raise UsageError(f"reshape: cannot reshape {original} into {tuple(shape)}") from e
    return _node(values, (a,), lambda g: (g.reshape(original),), "reshape")


def getitem(a: Tensor, index: Any) -> Tensor:
    def grad_fn(g: np.ndarray):
        out = np.zeros_like(a.values)
        np.add.at(out, index, g)
        return (out,)

    return _node(a.values[index], (a,), grad_fn, "getitem")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise UsageError("concat: empty tensor list")
    shapes = [t.shape for t in tensors]
    ax = axis % tensors[0].ndim
    for s in shapes[1:]:
        if len(s) != len(shapes[0]) or any(d1 != d2 for i, (d1, d2) in enumerate(zip(s, shapes[0])) if i != ax):
            raise UsageError(f"concat: incompatible shapes {shapes} along axis {axis}")
    cuts = np.cumsum([s[ax] for s in shapes])[:-1]

    def grad_fn(g: np.ndarray):
        return tuple(np.split(g, cuts, axis=ax))

    return _node(np.concatenate([t.values for t in tensors], axis=ax), tensors, grad_fn, "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise UsageError("stack: empty tensor list")
    shape = tensors[0].shape
    if any(t.shape != shape for t in tensors):
        raise UsageError(f"stack: shapes differ {[t.shape for t in tensors]}")
    ax = axis % (len(shape) + 1)

    def grad_fn(g: np.ndarray):
        return tuple(np.moveaxis(g, ax, 0))

    return _node(np.stack([t.values for t in tensors], axis=ax), tensors, grad_fn, "stack")


def sum_(a: Tensor, axis: int | None = None) -> Tensor:
    def grad_fn(g: np.ndarray):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _node(np.asarray(a.values.sum(axis=axis)), (a,), grad_fn, "sum")


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    count = a.size if axis is None else a.shape[axis]
    return sum_(a, axis) * (1.0 / count)


def pad_time(a: Tensor, pad: int) -> Tensor:
    """Zero-pad axis 1 of a (B, L, C) tensor on both sides."""
    if a.ndim != 3:
        raise UsageError(f"pad_time expects (B, L, C), got {a.shape}")
    if pad == 0:
        return a
    length = a.shape[1]
    values = np.pad(a.values, ((0, 0), (pad, pad), (0, 0)))
    return _node(values, (a,), lambda g: (g[:, pad : pad + length, :],), "pad_time")


def mse(a: Tensor, b: Any) -> Tensor:
    b = as_tensor(b)
    if a.shape != b.shape:
        raise UsageError(f"mse: shapes differ {a.shape} and {b.shape}")
    diff = a.values - b.values
    scale = 2.0 / max(diff.size, 1)

    def grad_fn(g: np.ndarray):
        ga = g * scale * diff
        return ga, -ga

    return _node(np.asarray(np.mean(diff * diff)), (a, b), grad_fn, "mse")


def lsq(a: Tensor, c: float) -> Tensor:
    """Mean least-squares distance of every element of a to the constant c."""
    diff = a.values - c
    scale = 2.0 / max(diff.size, 1)
    return _node(np.asarray(np.mean(diff * diff)), (a,), lambda g: (g * scale * diff,), "lsq")


def bce_with_logits(logits: Tensor, targets: Any) -> Tensor:
    t = as_tensor(targets).values
    if t.shape != logits.shape:
        raise UsageError(f"bce_with_logits: shapes differ {logits.shape} and {t.shape}")
    x = logits.values
    loss = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))
    scale = 1.0 / max(x.size, 1)
    return _node(np.asarray(loss.mean()), (logits,), lambda g: (g * scale * (expit(x) - t),), "bce_with_logits")


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack_: list[tuple[Tensor, bool]] = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack_.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into the .grad of every reachable trainable leaf."""
    if loss.size != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
    for node in reversed(_topological_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._grad_fn is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._grad_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg
