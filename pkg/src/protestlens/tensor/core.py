"""Tensor type and the reverse-mode graph.

Every differentiable op creates a node with a monotonically increasing id, so
creation order is a valid topological order. ``backward`` walks the reachable
nodes in exact reverse creation order and frees them afterwards.
"""

from __future__ import annotations

import contextlib
import itertools
from typing import Callable, Iterator, Sequence

import numpy as np

from ..errors import DimensionError, GraphStateError, NumericError

DEFAULT_DTYPE = np.float32

_node_ids = itertools.count()
_grad_enabled = True

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording inside the block (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """Dense float array with an optional gradient and graph attachment."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op", "_id", "_consumed")

    def __init__(self, data, requires_grad: bool = False, dtype=None, check_finite: bool = True):
        if dtype is not None:
            arr = np.asarray(data, dtype=dtype)
        elif isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64):
            arr = data
        else:
            arr = np.asarray(data, dtype=DEFAULT_DTYPE)
        if check_finite and not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite values in tensor of shape {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self._op = "leaf"
        self._id = -1
        self._consumed = False

    @classmethod
    def _wrap(cls, data: np.ndarray, requires_grad: bool) -> "Tensor":
        t = cls.__new__(cls)
        t.data = data
        t.grad = None
        t.requires_grad = requires_grad
        t._parents = ()
        t._backward = None
        t._op = "leaf"
        t._id = -1
        t._consumed = False
        return t

    # -- basic properties ------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    @property
    def op(self) -> str:
        return self._op

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.data, False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        rg = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{rg}, op={self._op})"

    def __len__(self) -> int:
        return len(self.data)

    # -- graph -----------------------------------------------------------
    def backward(self, grad: np.ndarray | None = None) -> None:
        backward(self, grad)

    # -- operator sugar (implemented in functional) ------------------------
    def __add__(self, other):
        from . import functional as F
        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import functional as F
        return F.sub(self, other)

    def __rsub__(self, other):
        from . import functional as F
        return F.sub(other, self)

    def __mul__(self, other):
        from . import functional as F
        return F.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import functional as F
        return F.div(self, other)

    def __rtruediv__(self, other):
        from . import functional as F
        return F.div(other, self)

    def __neg__(self):
        from . import functional as F
        return F.neg(self)

    def __pow__(self, exponent: float):
        from . import functional as F
        return F.power(self, exponent)

    def __matmul__(self, other):
        from . import functional as F
        return F.matmul(self, other)

    def __getitem__(self, index):
        from . import functional as F
        return F.getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False):
        from . import functional as F
        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from . import functional as F
        return F.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from . import functional as F
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def transpose(self, *axes):
        from . import functional as F
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return F.transpose(self, axes or None)

    @property
    def T(self):
        return self.transpose()


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x)
    if arr.dtype.kind != "f" or (dtype is not None and arr.dtype != dtype):
        arr = arr.astype(dtype or DEFAULT_DTYPE)
    return Tensor._wrap(arr, False)


def make_node(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn: BackwardFn, op: str) -> Tensor:
    """Wrap an op result, recording it in the graph when any parent needs grad."""
    needs = _grad_enabled and any(p.requires_grad for p in parents)
    out = Tensor._wrap(data, needs)
    if needs:
        out._parents = parents
        out._backward = backward_fn
        out._op = op
        out._id = next(_node_ids)
    return out


def graph_nodes(root: Tensor) -> list[Tensor]:
    """Interior nodes reachable from ``root`` in creation (insertion) order."""
    seen: set[int] = set()
    nodes: list[Tensor] = []
    stack = [root]
    while stack:
        t = stack.pop()
        if t._backward is None or id(t) in seen:
            continue
        seen.add(id(t))
        nodes.append(t)
        stack.extend(t._parents)
    nodes.sort(key=lambda n: n._id)
    return nodes


def backward(root: Tensor, grad: np.ndarray | None = None, trace: list | None = None) -> None:
    """Populate ``.grad`` on every leaf with ``requires_grad`` reachable from root.

    Leaf gradients accumulate across calls; the interior graph is released
    after one pass, so a second call on the same root raises.
    """
    if root._consumed:
        raise GraphStateError("backward already ran on this graph; rebuild it before calling again")
    if grad is None:
        if root.data.size != 1:
            raise DimensionError(f"backward needs a scalar root, got shape {root.shape}")
        grad = np.ones_like(root.data)
    else:
        grad = np.asarray(grad, dtype=root.dtype)
        if grad.shape != root.shape:
            raise DimensionError(f"seed gradient shape {grad.shape} does not match root {root.shape}")
    if not root.requires_grad:
        raise GraphStateError("root does not require grad; nothing to differentiate")
    if not np.all(np.isfinite(root.data)):
        raise NumericError("non-finite value at backward root")

    if root._backward is None:
        root.grad = grad.copy() if root.grad is None else root.grad + grad
        root._consumed = True
        return

    grads: dict[int, np.ndarray] = {id(root): grad}
    nodes = graph_nodes(root)
    for node in reversed(nodes):
        g = grads.pop(id(node), None)
        if trace is not None:
            trace.append((node._id, node._op))
        if g is None:
            continue
        parent_grads = node._backward(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            if pg.dtype != parent.dtype:
                pg = pg.astype(parent.dtype)
            if parent._backward is None:
                parent.grad = pg.copy() if parent.grad is None else parent.grad + pg
            else:
                key = id(parent)
                prev = grads.get(key)
                grads[key] = pg if prev is None else prev + pg
    for node in nodes:
        node._backward = None
        node._parents = ()
        node._consumed = True
    root._consumed = True
