"""Reverse-mode gradients over numpy arrays.

A Tensor wraps an ndarray plus an optional gradient.  Ops (see ops.py)
build a graph by recording parents and a backward closure; backward()
walks the graph in reverse topological order.  Works on float32 and
float64 data; everything else is promoted to float64.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Optional

import numpy as np

_CHECKED = False


@contextlib.contextmanager
def checked_mode(enabled: bool = True):
    """Within this context every op validates shapes/dtypes and rejects
    non-finite results.  Costs roughly one extra pass over each output."""
    global _CHECKED
    previous = _CHECKED
    _CHECKED = enabled
    try:
        yield
    finally:
        _CHECKED = previous


def is_checked() -> bool:
    return _CHECKED


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._backward: Optional[Callable[[], None]] = None
        self._prev: tuple = ()

    # -- graph bookkeeping -------------------------------------------------

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            # first contribution: copy instead of zeros + add (one pass less)
            g = np.asarray(g, dtype=self.data.dtype)
            if g.shape != self.data.shape:
                g = np.broadcast_to(g, self.data.shape)
            self.grad = g.copy()
        else:
            self.grad += g

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
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
            for parent in node._prev:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward()

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # -- conveniences --------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # operator sugar; implementations live in ops.py
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops

        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops

        return ops.div(self, other)

    def __neg__(self):
        from . import ops

        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)


class Param(Tensor):
    """Named trainable leaf."""

    __slots__ = ("name",)

    def __init__(self, name: str, data):
        super().__init__(np.array(data, dtype=np.float64), requires_grad=True)
        self.name = name

    def __repr__(self) -> str:
        return f"Param({self.name!r}, shape={self.data.shape})"


def collect_params(obj) -> list[Param]:
    """Walk an object's attribute tree and return Params in a stable,
    name-sorted order.  Containers (list/tuple/dict) are descended into."""
    found: dict[str, Param] = {}

    def visit(x, trail: set[int]) -> None:
        if id(x) in trail:
            return
        trail.add(id(x))
        if isinstance(x, Param):
            if x.name in found and found[x.name] is not x:
                raise ValueError(f"duplicate param name: {x.name}")
            found[x.name] = x
            return
        if isinstance(x, (list, tuple)):
            for item in x:
                visit(item, trail)
            return
        if isinstance(x, dict):
            for item in x.values():
                visit(item, trail)
            return
        slots = getattr(x, "__dict__", None)
        if slots is not None:
            for item in slots.values():
                visit(item, trail)

    visit(obj, set())
    return [found[k] for k in sorted(found)]


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def finite_or_raise(arr: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{op}: non-finite values in output")
