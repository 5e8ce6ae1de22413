"""Reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Tensor` wraps a numpy array and records the operation that
produced it, so a computation builds an implicit DAG. Calling
:func:`backward` on a scalar result fills ``grad`` on every reachable
tensor whose ``requires_grad`` flag is set. Everything runs in double
precision; the numerical guarantees elsewhere in the package rely on it.

The engine is deliberately small: only the operations the layer stack
and the objectives need are implemented, and each one is covered by the
central-finite-difference checks in :mod:`encgan.gradcheck`.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ContractError, DimensionMismatchError

__all__ = [
    "Tensor",
    "backward",
    "matmul",
    "transpose",
    "select_rows",
]


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """Dense float64 value with an optional gradient slot.

    Leaf tensors are constructed directly (parameters pass
    ``requires_grad=True``); non-leaf tensors are produced by operations
    and remember their parents. ``data`` may be mutated in place only on
    leaves (the optimizers do), never on nodes inside a live graph.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backprop")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ContractError("tensor data must be finite")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backprop = None

    @classmethod
    def _from_op(cls, data: np.ndarray, parents, backprop) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        out._parents = tuple(parents) if out.requires_grad else ()
        out._backprop = backprop if out.requires_grad else None
        return out

    # -- introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.data
        return self.data.astype(dtype)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def grad_array(self) -> np.ndarray:
        """Gradient as an array, zeros when no gradient flowed here."""
        if self.grad is None:
            return np.zeros_like(self.data)
        return self.grad

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        other = _lift(other)
        out_data = self.data + other.data

        def backprop(g):
            _accumulate(self, _unbroadcast(g, self.data.shape))
            _accumulate(other, _unbroadcast(g, other.data.shape))

        return Tensor._from_op(out_data, (self, other), backprop)

    def __radd__(self, other):
        return _lift(other) + self

    def __sub__(self, other):
        other = _lift(other)
        out_data = self.data - other.data

        def backprop(g):
            _accumulate(self, _unbroadcast(g, self.data.shape))
            _accumulate(other, _unbroadcast(-g, other.data.shape))

        return Tensor._from_op(out_data, (self, other), backprop)

    def __rsub__(self, other):
        return _lift(other) - self

    def __mul__(self, other):
        other = _lift(other)
        out_data = self.data * other.data

        def backprop(g):
            _accumulate(self, _unbroadcast(g * other.data, self.data.shape))
            _accumulate(other, _unbroadcast(g * self.data, other.data.shape))

        return Tensor._from_op(out_data, (self, other), backprop)

    def __rmul__(self, other):
        return _lift(other) * self

    def __neg__(self):
        def backprop(g):
            _accumulate(self, -g)

        return Tensor._from_op(-self.data, (self,), backprop)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return self * other ** -1.0
        return self * (1.0 / float(other))

    def __pow__(self, exponent):
        exponent = float(exponent)
        if exponent != int(exponent) and np.any(self.data < 0.0):
            raise ContractError("fractional power of a negative value")
        if exponent < 0 and np.any(self.data == 0.0):
            raise ContractError("negative power of zero")
        out_data = self.data ** exponent

        def backprop(g):
            _accumulate(self, g * exponent * self.data ** (exponent - 1.0))

        return Tensor._from_op(out_data, (self,), backprop)

    def __matmul__(self, other):
        return matmul(self, other)

    # -- reductions and elementwise maps --------------------------------

    def sum(self, axis=None) -> "Tensor":
        if axis not in (None, 0, 1):
            raise ContractError(f"unsupported reduction axis {axis!r}")
        out_data = self.data.sum(axis=axis)
        shape = self.data.shape

        def backprop(g):
            if axis is None:
                _accumulate(self, np.broadcast_to(g, shape))
            else:
                _accumulate(self, np.broadcast_to(np.expand_dims(g, axis), shape))

        return Tensor._from_op(np.asarray(out_data), (self,), backprop)

    def mean(self, axis=None) -> "Tensor":
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    def log(self) -> "Tensor":
        if np.any(self.data <= 0.0):
            raise ContractError(
                f"log requires strictly positive input, min={self.data.min()!r}"
            )
        out_data = np.log(self.data)

        def backprop(g):
            _accumulate(self, g / self.data)

        return Tensor._from_op(out_data, (self,), backprop)

    def tanh(self) -> "Tensor":
        out_data = np.tanh(self.data)

        def backprop(g):
            _accumulate(self, g * (1.0 - out_data * out_data))

        return Tensor._from_op(out_data, (self,), backprop)

    def leaky_relu(self, slope: float = 0.2) -> "Tensor":
        if not 0.0 < slope < 1.0:
            raise ContractError("leaky-relu slope must lie in (0, 1)")
        nonneg = self.data >= 0.0
        out_data = np.where(nonneg, self.data, slope * self.data)

        def backprop(g):
            _accumulate(self, g * np.where(nonneg, 1.0, slope))

        return Tensor._from_op(out_data, (self,), backprop)

    @property
    def T(self) -> "Tensor":
        return transpose(self)


def _lift(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64))


def _accumulate(node: Tensor, contribution: np.ndarray):
    if not node.requires_grad:
        return
    if node.grad is None:
        node.grad = np.array(contribution, dtype=np.float64, copy=True)
    else:
        node.grad += contribution


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for 1-D and 2-D operands, numpy semantics.

    Raises :class:`DimensionMismatchError` naming both shapes when the
    inner extents disagree.
    """
    a, b = _lift(a), _lift(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise DimensionMismatchError(
            f"matmul supports 1-D/2-D operands, got {a.shape} @ {b.shape}"
        )
    if a.data.shape[-1] != b.data.shape[0]:
        raise DimensionMismatchError(
            f"matmul inner extents disagree: {a.shape} @ {b.shape}"
        )
    out_data = a.data @ b.data

    def backprop(g):
        if a.ndim == 2 and b.ndim == 2:
            _accumulate(a, g @ b.data.T)
            _accumulate(b, a.data.T @ g)
        elif a.ndim == 2 and b.ndim == 1:
            _accumulate(a, np.outer(g, b.data))
            _accumulate(b, a.data.T @ g)
        elif a.ndim == 1 and b.ndim == 2:
            _accumulate(a, b.data @ g)
            _accumulate(b, np.outer(a.data, g))
        else:
            _accumulate(a, g * b.data)
            _accumulate(b, g * a.data)

    return Tensor._from_op(np.asarray(out_data), (a, b), backprop)


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise DimensionMismatchError(f"transpose expects a matrix, got {x.shape}")

    def backprop(g):
        _accumulate(x, g.T)

    return Tensor._from_op(x.data.T.copy(), (x,), backprop)


def select_rows(rows: Sequence[Tensor], indices) -> Tensor:
    """Stack ``rows[indices[k]]`` into a matrix, one graph node.

    The backward pass scatter-adds each output row's gradient into the
    selected source tensor only, so unselected rows receive none.
    """
    rows = list(rows)
    if not rows:
        raise ContractError("select_rows needs at least one source row")
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ContractError("indices must be a flat sequence")
    n = len(rows)
    if np.any(idx < 0) or np.any(idx >= n):
        raise ContractError(
            f"bias index out of range: valid [0, {n}), got {idx.min()}..{idx.max()}"
        )
    shape = rows[0].data.shape
    for r in rows:
        if r.data.shape != shape:
            raise DimensionMismatchError("all source rows must share one shape")
    out_data = np.stack([rows[i].data for i in idx], axis=0)

    def backprop(g):
        for j in range(n):
            mask = idx == j
            if mask.any():
                _accumulate(rows[j], g[mask].sum(axis=0))

    return Tensor._from_op(out_data, tuple(rows), backprop)


def _topological_order(root: Tensor):
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in reversed(node._parents):
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor):
    """Reverse-mode gradient accumulation from a scalar node.

    Gradients of every reachable tensor are reset first, so repeated
    calls on the same graph are bit-identical. Tensors with
    ``requires_grad=False`` are skipped.
    """
    if not isinstance(loss, Tensor):
        raise ContractError("backward expects a Tensor")
    if loss.data.shape != ():
        raise ContractError(f"backward expects a scalar loss, got shape {loss.shape}")
    order = _topological_order(loss)
    for node in order:
        node.grad = None
    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(order):
        if node._backprop is not None and node.grad is not None:
            node._backprop(node.grad)
