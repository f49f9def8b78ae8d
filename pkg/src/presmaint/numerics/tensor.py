"""Dense float64 tensors with reverse-mode automatic differentiation.

Tensors wrap row-major numpy arrays. While a Tape is active, every primitive
operation whose inputs require gradients appends a node (output, inputs,
backward closure) to the tape; ``Tape.backward`` walks the nodes in reverse
creation order, which is a valid topological order for a dynamically built
graph, visiting each node exactly once and accumulating gradients into
``Tensor.grad``.

Scope is deliberately small: 2-D matrices (plus 1x1 scalars), matrix/vector
broadcasting for bias rows, and the handful of nonlinearities the attention
models and agent networks need. No GPU, no general broadcasting, no views.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not conform."""


class NonFiniteError(FloatingPointError):
    """A value that must be finite is NaN or infinite."""


def _as_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


class Tensor:
    """A 2-D float64 matrix, optionally tracked for gradients."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False, _validate: bool = True):
        self.data = _as_array(data)
        if _validate and not np.all(np.isfinite(self.data)):
            raise NonFiniteError("tensor entries must be finite")
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def zeros(rows: int, cols: int, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros((rows, cols)), requires_grad=requires_grad, _validate=False)


class _Node:
    __slots__ = ("out", "backward_fn")

    def __init__(self, out: Tensor, backward_fn: Callable[[np.ndarray], None]):
        self.out = out
        self.backward_fn = backward_fn


_TAPE_STACK: list["Tape"] = []


class Tape:
    """Ordered record of primitive operations for one backward pass."""

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        _TAPE_STACK.pop()
        return False

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(tensor) into .grad for every tracked tensor.

        loss must be a scalar (1x1) produced through taped operations.
        """
        if loss.data.size != 1:
            raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
        loss._accumulate(np.ones((1, 1)))
        for node in reversed(self.nodes):
            g = node.out.grad
            if g is None:
                continue
            node.backward_fn(g)


def _active_tape() -> Optional[Tape]:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _record(out: Tensor, inputs: Sequence[Tensor], backward_fn) -> Tensor:
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.nodes.append(_Node(out, backward_fn))
    return out


def _raw(data: np.ndarray) -> Tensor:
    return Tensor(data, _validate=False)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} x {b.shape} do not conform")
    out = _raw(a.data @ b.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _record(out, (a, b), backward)


def _broadcast_kind(a: Tensor, b: Tensor) -> str:
    if a.shape == b.shape:
        return "same"
    if b.shape == (1, 1):
        return "scalar"
    if b.shape == (1, a.shape[1]):
        return "row"
    raise ShapeError(f"shapes {a.shape} and {b.shape} do not conform")


def _reduce_to(g: np.ndarray, kind: str) -> np.ndarray:
    if kind == "same":
        return g
    if kind == "scalar":
        return g.sum().reshape(1, 1)
    return g.sum(axis=0, keepdims=True)


def add(a: Tensor, b: Tensor) -> Tensor:
    kind = _broadcast_kind(a, b)
    out = _raw(a.data + b.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(_reduce_to(g, kind))

    return _record(out, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    kind = _broadcast_kind(a, b)
    out = _raw(a.data - b.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(-_reduce_to(g, kind))

    return _record(out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    kind = _broadcast_kind(a, b)
    out = _raw(a.data * b.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * b.data)
        if b.requires_grad:
            b._accumulate(_reduce_to(g * a.data, kind))

    return _record(out, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    kind = _broadcast_kind(a, b)
    out = _raw(a.data / b.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g / b.data)
        if b.requires_grad:
            b._accumulate(_reduce_to(-g * a.data / (b.data * b.data), kind))

    return _record(out, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out = _raw(a.data * c)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * c)

    return _record(out, (a,), backward)


def transpose(a: Tensor) -> Tensor:
    out = _raw(np.ascontiguousarray(a.data.T))

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.ascontiguousarray(g.T))

    return _record(out, (a,), backward)


def concat(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    if axis not in (0, 1):
        raise ShapeError(f"concat axis must be 0 or 1, got {axis}")
    out = _raw(np.concatenate([p.data for p in parts], axis=axis))
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                piece = g[lo:hi, :] if axis == 0 else g[:, lo:hi]
                p._accumulate(piece)

    return _record(out, tuple(parts), backward)


# ---------------------------------------------------------------------------
# reductions


def sum_all(a: Tensor) -> Tensor:
    out = _raw(a.data.sum().reshape(1, 1))

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.full(a.shape, g[0, 0]))

    return _record(out, (a,), backward)


def mean_all(a: Tensor) -> Tensor:
    n = a.size
    out = _raw(a.data.mean().reshape(1, 1))

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.full(a.shape, g[0, 0] / n))

    return _record(out, (a,), backward)


def sum_axis(a: Tensor, axis: int) -> Tensor:
    out = _raw(a.data.sum(axis=axis, keepdims=True))

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.broadcast_to(g, a.shape))

    return _record(out, (a,), backward)


def mean_axis(a: Tensor, axis: int) -> Tensor:
    n = a.shape[axis]
    out = _raw(a.data.mean(axis=axis, keepdims=True))

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.broadcast_to(g / n, a.shape))

    return _record(out, (a,), backward)


# ---------------------------------------------------------------------------
# nonlinearities


def relu(a: Tensor) -> Tensor:
    out = _raw(np.maximum(a.data, 0.0))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (a.data > 0.0))

    return _record(out, (a,), backward)


_SIG_LO = 1e-12
_SIG_HI = 1.0 - 1e-12


def sigmoid(a: Tensor) -> Tensor:
    """Logistic function, clamped into the open interval (0, 1).

    The clamp keeps downstream range guarantees strict even when float64
    saturates (sigmoid(40) rounds to exactly 1.0).
    """
    x = a.data
    p = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                 np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    p = np.clip(p, _SIG_LO, _SIG_HI)
    out = _raw(p)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * p * (1.0 - p))

    return _record(out, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = _raw(y)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (1.0 - y * y))

    return _record(out, (a,), backward)


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    out = _raw(y)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * y)

    return _record(out, (a,), backward)


def log(a: Tensor) -> Tensor:
    out = _raw(np.log(a.data))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g / a.data)

    return _record(out, (a,), backward)


def absolute(a: Tensor) -> Tensor:
    out = _raw(np.abs(a.data))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * np.sign(a.data))

    return _record(out, (a,), backward)


def _softmax_data(x: np.ndarray, mask: Optional[np.ndarray]) -> np.ndarray:
    if mask is not None:
        x = np.where(mask, -np.inf, x)
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    if mask is not None:
        e = np.where(mask, 0.0, e)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows(a: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """Row-wise softmax with per-row max subtraction.

    mask, if given, is a boolean array of a's shape; True entries are
    excluded and get probability exactly 0.0. Every row must keep at least
    one unmasked entry.
    """
    p = _softmax_data(a.data, mask)
    out = _raw(p)

    def backward(g):
        if a.requires_grad:
            dot = (g * p).sum(axis=1, keepdims=True)
            a._accumulate(p * (g - dot))

    return _record(out, (a,), backward)


def log_softmax_rows(a: Tensor) -> Tensor:
    x = a.data
    shifted = x - x.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out = _raw(shifted - lse)
    p = np.exp(out.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g - p * g.sum(axis=1, keepdims=True))

    return _record(out, (a,), backward)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Row-wise normalization to mean 0 / variance 1, then affine.

    gain and bias are (1, n) rows; rows must have length >= 2.
    """
    if a.shape[1] < 2:
        raise ShapeError(f"layer_norm rows must have length >= 2, got {a.shape}")
    if gain.shape != (1, a.shape[1]) or bias.shape != (1, a.shape[1]):
        raise ShapeError(
            f"layer_norm affine shapes {gain.shape}/{bias.shape} do not match rows of {a.shape}"
        )
    x = a.data
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    out = _raw(xhat * gain.data + bias.data)

    def backward(g):
        if gain.requires_grad:
            gain._accumulate((g * xhat).sum(axis=0, keepdims=True))
        if bias.requires_grad:
            bias._accumulate(g.sum(axis=0, keepdims=True))
        if a.requires_grad:
            dxhat = g * gain.data
            m1 = dxhat.mean(axis=1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=1, keepdims=True)
            a._accumulate(inv * (dxhat - m1 - xhat * m2))

    return _record(out, (a, gain, bias), backward)


# ---------------------------------------------------------------------------
# indexing and regularization


def take_per_row(a: Tensor, indices: np.ndarray) -> Tensor:
    """out[i, 0] = a[i, indices[i]]."""
    idx = np.asarray(indices, dtype=np.intp).reshape(-1)
    if idx.shape[0] != a.shape[0]:
        raise ShapeError(f"take_per_row: {idx.shape[0]} indices for {a.shape[0]} rows")
    rows = np.arange(a.shape[0])
    out = _raw(a.data[rows, idx].reshape(-1, 1))

    def backward(g):
        if a.requires_grad:
            full = np.zeros(a.shape)
            np.add.at(full, (rows, idx), g[:, 0])
            a._accumulate(full)

    return _record(out, (a,), backward)


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; training-time only. rate=0 is the identity."""
    if rate <= 0.0:
        return a
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    out = _raw(a.data * keep)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * keep)

    return _record(out, (a,), backward)
