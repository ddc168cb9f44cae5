"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps one ndarray and remembers how it was produced. Calling
``backward()`` on a scalar result walks the recorded graph in reverse
topological order and accumulates gradients into every tensor that was
created with ``requires_grad=True``. Forward ops never mutate their
inputs, so repeated evaluation of the same graph is bit-identical.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError

_FLOAT_DTYPES = (np.float32, np.float64)


def _coerce(data, dtype=None) -> np.ndarray:
    arr = np.asarray(data)
    if dtype is not None:
        return arr.astype(dtype, copy=False)
    if arr.dtype not in _FLOAT_DTYPES:
        return arr.astype(np.float64)
    return arr


class Tensor:
    """A value in the computation graph.

    data is row-major real storage, shape is its dimension list, and
    requires_grad marks leaves that should receive gradients. Non-leaf
    tensors carry a backward closure installed by the op that made them.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = _coerce(data, dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- construction used by ops ------------------------------------------

    @staticmethod
    def _from_op(data: np.ndarray, parents: tuple["Tensor", ...]) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        out._parents = parents if out.requires_grad else ()
        out._backward = None
        return out

    # -- basic properties ---------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    # -- gradient plumbing ----------------------------------------------------

    def _accum_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            # copy: g may be a view into another node's grad buffer
            self.grad = np.array(g, dtype=self.data.dtype)
        else:
            np.add(self.grad, g, out=self.grad)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, seed: np.ndarray | None = None) -> None:
        """Backpropagate from this tensor.

        seed defaults to ones (for a scalar loss this is d loss/d loss = 1).
        """
        if not self.requires_grad:
            raise ConfigError("backward() on a tensor that does not require grad")
        if seed is None:
            seed = np.ones_like(self.data)
        else:
            seed = _coerce(seed, self.data.dtype)
            if seed.shape != self.data.shape:
                raise ConfigError(
                    f"backward seed shape {seed.shape} != tensor shape {self.data.shape}"
                )
        order = _topo_order(self)
        self._accum_grad(seed)
        for node in order:
            if node._backward is not None:
                node._backward()

    # -- operator sugar (implementations live in ops.py) ----------------------

    def __add__(self, other):
        from . import ops

        return ops.add(self, ops.as_tensor(other, self.dtype))

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, ops.as_tensor(other, self.dtype))

    def __rsub__(self, other):
        from . import ops

        return ops.sub(ops.as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, ops.as_tensor(other, self.dtype))

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops

        return ops.div(self, ops.as_tensor(other, self.dtype))

    def __rtruediv__(self, other):
        from . import ops

        return ops.div(ops.as_tensor(other, self.dtype), self)

    def __neg__(self):
        from . import ops

        return ops.neg(self)

    def __pow__(self, p):
        from . import ops

        return ops.pow_const(self, p)

    def __getitem__(self, key):
        from . import ops

        return ops.getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        from . import ops

        return ops.tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import ops

        return ops.tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, shape):
        from . import ops

        return ops.reshape(self, shape)

    def transpose(self, axes):
        from . import ops

        return ops.transpose(self, axes)


def _topo_order(root: Tensor) -> list[Tensor]:
    """Reverse topological order, iterative so deep graphs cannot overflow."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    order.reverse()
    return order
