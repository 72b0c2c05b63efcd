"""Minimal reverse-mode gradient engine over numpy arrays.

Every operation builds a node holding its value, its parents, and a
backward closure. ``Tensor.backward()`` topologically sorts the reachable
graph and pushes gradients down to the leaves. Leaf gradients accumulate
across calls; intermediate gradients are reset per call, so evaluating a
fresh objective and calling backward adds into parameter gradients.

All arithmetic is float64; file formats stay float32 at their boundaries.
"""
from __future__ import annotations

from contextlib import contextmanager

import numpy as np


class NumericError(RuntimeError):
    """A non-finite value was produced where finite values are required."""


# Optional trace of discrete forward decisions (rectifier signs, clip
# masks, pruning choices). The finite-difference checker uses it to detect
# probes that step across a kink, where central differences are undefined.
_trace_sink: list | None = None


@contextmanager
def trace_discrete(sink: list):
    global _trace_sink
    previous = _trace_sink
    _trace_sink = sink
    try:
        yield sink
    finally:
        _trace_sink = previous


def record_discrete(state) -> None:
    if _trace_sink is not None:
        _trace_sink.append(np.asarray(state).copy())


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_bwd")

    def __init__(self, data, _parents=(), _bwd=None):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self._parents = tuple(_parents)
        self._bwd = _bwd

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``.

        Requires a scalar node. Raises :class:`NumericError` if any
        parameter gradient comes out non-finite.
        """
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar objective")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        for node in topo:
            if node._parents:  # intermediate: start this pass from zero
                node.grad = None
        _accum(self, np.ones_like(self.data))
        for node in reversed(topo):
            if node._bwd is not None and node.grad is not None:
                node._bwd(node.grad)
        for node in topo:
            if isinstance(node, Parameter) and node.grad is not None:
                if not np.all(np.isfinite(node.grad)):
                    raise NumericError(
                        f"non-finite gradient for parameter {node.name!r}"
                    )

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"


class Parameter(Tensor):
    """Named trainable leaf; the unit of optimization and checkpointing."""

    __slots__ = ("name",)

    def __init__(self, name: str, data):
        super().__init__(data)
        self.name = name
        if not np.all(np.isfinite(self.data)):
            raise NumericError(f"non-finite initial value for parameter {name!r}")

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    squeeze = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if squeeze:
        g = g.sum(axis=squeeze, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)

    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return Tensor(a.data + b.data, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)

    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    return Tensor(a.data - b.data, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)

    def bwd(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return Tensor(a.data * b.data, (a, b), bwd)


def neg(a) -> Tensor:
    a = _wrap(a)

    def bwd(g):
        _accum(a, -g)

    return Tensor(-a.data, (a,), bwd)


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("matmul expects 2-D operands")

    def bwd(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return Tensor(a.data @ b.data, (a, b), bwd)


def transpose(a) -> Tensor:
    a = _wrap(a)
    if a.ndim != 2:
        raise ValueError("transpose expects a 2-D tensor")

    def bwd(g):
        _accum(a, g.T)

    return Tensor(a.data.T, (a,), bwd)


def reshape(a, shape) -> Tensor:
    a = _wrap(a)

    def bwd(g):
        _accum(a, g.reshape(a.data.shape))

    return Tensor(a.data.reshape(shape), (a,), bwd)


def concat(parts, axis: int = 0) -> Tensor:
    parts = [_wrap(p) for p in parts]
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        for p, piece in zip(parts, np.split(g, splits, axis=axis)):
            _accum(p, piece)

    return Tensor(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), bwd)


def reduce_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)

    def bwd(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape).copy())
        else:
            expanded = g if keepdims else np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(expanded, a.data.shape).copy())

    return Tensor(a.data.sum(axis=axis, keepdims=keepdims), (a,), bwd)


def gather_rows(a, indices) -> Tensor:
    """Select rows of a 2-D tensor (or elements of a 1-D tensor)."""
    a = _wrap(a)
    idx = np.asarray(indices, dtype=np.intp)

    def bwd(g):
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        np.add.at(a.grad, idx, g)

    return Tensor(a.data[idx], (a,), bwd)


def narrow(a, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice along axis 0 or 1."""
    a = _wrap(a)
    if axis == 0:
        view = a.data[start:stop]
    elif axis == 1:
        view = a.data[:, start:stop]
    else:
        raise ValueError("narrow supports axis 0 or 1")

    def bwd(g):
        buf = np.zeros_like(a.data)
        if axis == 0:
            buf[start:stop] = g
        else:
            buf[:, start:stop] = g
        _accum(a, buf)

    return Tensor(view.copy(), (a,), bwd)


def relu(a) -> Tensor:
    a = _wrap(a)
    active = a.data > 0
    record_discrete(active)

    def bwd(g):
        _accum(a, g * active)

    return Tensor(np.maximum(a.data, 0.0), (a,), bwd)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    y = _sigmoid(a.data)

    def bwd(g):
        _accum(a, g * y * (1.0 - y))

    return Tensor(y, (a,), bwd)


def exp(a) -> Tensor:
    a = _wrap(a)
    y = np.exp(a.data)

    def bwd(g):
        _accum(a, g * y)

    return Tensor(y, (a,), bwd)


def log(a) -> Tensor:
    a = _wrap(a)

    def bwd(g):
        _accum(a, g / a.data)

    return Tensor(np.log(a.data), (a,), bwd)


def clip(a, lo: float, hi: float) -> Tensor:
    a = _wrap(a)
    inside = (a.data > lo) & (a.data < hi)
    record_discrete(inside)

    def bwd(g):
        _accum(a, g * inside)

    return Tensor(np.clip(a.data, lo, hi), (a,), bwd)


def softmax(a, axis: int = -1) -> Tensor:
    """Stable softmax; -inf entries come out exactly 0 and get no gradient."""
    a = _wrap(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        _accum(a, (g - inner) * y)

    return Tensor(y, (a,), bwd)


def logsumexp(a) -> Tensor:
    """log sum exp over all elements; returns a scalar tensor."""
    a = _wrap(a)
    m = np.max(a.data)
    e = np.exp(a.data - m)
    total = e.sum()
    y = m + np.log(total)
    soft = e / total

    def bwd(g):
        _accum(a, g * soft)

    return Tensor(y, (a,), bwd)
