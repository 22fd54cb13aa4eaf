"""Small reverse-mode autodiff over float64 numpy arrays.

Only the operations the generators, adversaries and autoencoders need are
provided. Every op records its parents and a closure that accumulates
gradients into them; ``Tensor.backward`` walks the graph in reverse
topological order.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import ContractError, DimensionError


def _as_array(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    # sum out the axes numpy broadcasting added or stretched
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.name = name

    # -- construction helpers -------------------------------------------------
    @classmethod
    def from_op(cls, data, parents: Sequence["Tensor"], backward: Callable[[np.ndarray], None]) -> "Tensor":
        """Build the output of a custom op.

        ``backward`` receives the upstream gradient (same shape as ``data``) and
        is responsible for calling ``_accumulate`` on the parents it feeds.
        """
        out = cls(data)
        out._parents = tuple(parents)
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._backward = backward
        return out

    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        g = _unbroadcast(np.asarray(g, dtype=np.float64), self.data.shape)
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad = self.grad + g

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def numpy(self) -> np.ndarray:
        return self.data

    # -- arithmetic -----------------------------------------------------------
    def __add__(self, other) -> "Tensor":
        other = ensure_tensor(other)

        def backward(g):
            self._accumulate(g)
            other._accumulate(g)

        return Tensor.from_op(self.data + other.data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        return Tensor.from_op(-self.data, (self,), lambda g: self._accumulate(-g))

    def __sub__(self, other) -> "Tensor":
        other = ensure_tensor(other)

        def backward(g):
            self._accumulate(g)
            other._accumulate(-g)

        return Tensor.from_op(self.data - other.data, (self, other), backward)

    def __rsub__(self, other) -> "Tensor":
        return ensure_tensor(other) - self

    def __mul__(self, other) -> "Tensor":
        other = ensure_tensor(other)

        def backward(g):
            self._accumulate(g * other.data)
            other._accumulate(g * self.data)

        return Tensor.from_op(self.data * other.data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = ensure_tensor(other)

        def backward(g):
            self._accumulate(g / other.data)
            other._accumulate(-g * self.data / (other.data * other.data))

        return Tensor.from_op(self.data / other.data, (self, other), backward)

    def __matmul__(self, other) -> "Tensor":
        other = ensure_tensor(other)
        if self.ndim not in (1, 2) or other.ndim != 2:
            raise DimensionError(f"matmul expects (n,)/(b,n) @ (n,m), got {self.shape} @ {other.shape}")
        if self.shape[-1] != other.shape[0]:
            raise DimensionError(f"matmul inner dims differ: {self.shape} @ {other.shape}")

        def backward(g):
            if self.ndim == 1:
                self._accumulate(other.data @ g)
                other._accumulate(np.outer(self.data, g))
            else:
                self._accumulate(g @ other.data.T)
                other._accumulate(self.data.T @ g)

        return Tensor.from_op(self.data @ other.data, (self, other), backward)

    def square(self) -> "Tensor":
        return Tensor.from_op(self.data * self.data, (self,), lambda g: self._accumulate(2.0 * g * self.data))

    # -- reductions and reshapes ---------------------------------------------
    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        shape = self.data.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, shape))

        return Tensor.from_op(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape) -> "Tensor":
        old = self.data.shape
        return Tensor.from_op(self.data.reshape(*shape), (self,), lambda g: self._accumulate(g.reshape(old)))

    # -- elementwise nonlinearities ------------------------------------------
    def relu(self) -> "Tensor":
        mask = self.data > 0
        return Tensor.from_op(self.data * mask, (self,), lambda g: self._accumulate(g * mask))

    def tanh(self) -> "Tensor":
        out = np.tanh(self.data)
        return Tensor.from_op(out, (self,), lambda g: self._accumulate(g * (1.0 - out * out)))

    def sigmoid(self) -> "Tensor":
        out = 0.5 * (1.0 + np.tanh(0.5 * self.data))
        return Tensor.from_op(out, (self,), lambda g: self._accumulate(g * out * (1.0 - out)))

    def exp(self) -> "Tensor":
        out = np.exp(self.data)
        return Tensor.from_op(out, (self,), lambda g: self._accumulate(g * out))

    def softmax(self, axis: int = -1) -> "Tensor":
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        out = e / e.sum(axis=axis, keepdims=True)

        def backward(g):
            inner = (g * out).sum(axis=axis, keepdims=True)
            self._accumulate(out * (g - inner))

        return Tensor.from_op(out, (self,), backward)

    # -- graph traversal -------------------------------------------------------
    def backward(self, grad: np.ndarray | None = None) -> None:
        """Populate ``.grad`` on every reachable tensor that requires it."""
        if grad is None:
            if self.data.size != 1:
                raise ContractError(f"backward() needs a scalar loss, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen and parent.requires_grad:
                    stack.append((parent, False))
        # interior nodes are scratch: reset so repeated backward calls on a
        # shared subgraph do not double count; leaves keep accumulating
        for node in order:
            if node._backward is not None:
                node.grad = None
        self.grad = np.asarray(grad, dtype=np.float64).copy()
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def ensure_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(_as_array(value))


def stack_rows(rows: Iterable[Tensor]) -> Tensor:
    """Stack 1-d tensors into a (n, d) tensor."""
    rows = list(rows)
    data = np.stack([r.data for r in rows])

    def backward(g):
        for i, r in enumerate(rows):
            r._accumulate(g[i])

    return Tensor.from_op(data, rows, backward)


def straight_through(source: Tensor, value: np.ndarray) -> Tensor:
    """Forward ``value``; backward hands the gradient to ``source`` unchanged."""
    value = _as_array(value)
    if value.shape != source.shape:
        raise DimensionError(f"straight-through shapes differ: {source.shape} vs {value.shape}")
    return Tensor.from_op(value.copy(), (source,), lambda g: source._accumulate(g))


def gather_rows(table: Tensor, index: np.ndarray) -> Tensor:
    """Select rows ``table[index]`` with gradient scattered back."""
    index = np.asarray(index, dtype=np.int64)

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, index, g)
        table._accumulate(full)

    return Tensor.from_op(table.data[index], (table,), backward)
