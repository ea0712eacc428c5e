"""Define-by-run reverse-mode differentiation.

A fresh :class:`Tape` is created for every training step. Each operation on a
:class:`Var` appends one node holding its value and a vector-Jacobian closure
per differentiable input; :func:`backward` walks the node list once in reverse.

Arithmetic between a Var and a constant array follows numpy broadcasting and
the adjoint is summed back to the operand's shape.
"""
from __future__ import annotations

import numpy as np

from .tensor import ShapeError, check_finite


class _Node:
    __slots__ = ("op", "parents")

    def __init__(self, op, parents):
        self.op = op
        self.parents = parents  # tuple of (node index, vjp)


class Tape:
    def __init__(self):
        self.nodes: list[_Node] = []
        self.leaves: dict[int, tuple[str, bool, tuple]] = {}

    def __len__(self):
        return len(self.nodes)

    def leaf(self, value, name: str | None = None, trainable: bool = True) -> "Var":
        value = np.asarray(value, dtype=np.float64)
        idx = len(self.nodes)
        check_finite(value, "leaf", idx)
        self.nodes.append(_Node("leaf", ()))
        self.leaves[idx] = (name if name is not None else f"leaf{idx}", trainable, value.shape)
        return Var(self, idx, value)

    def leaves_from(self, params: dict, frozen=()) -> dict:
        """Register a parameter dict; frozen entries stay plain constants."""
        return {
            k: (v if k in frozen else self.leaf(v, k))
            for k, v in params.items()
        }

    def _record(self, op, value, parents) -> "Var":
        idx = len(self.nodes)
        check_finite(value, op, idx)
        self.nodes.append(_Node(op, tuple(parents)))
        return Var(self, idx, value)


def _defers(o):
    # hyper-dual numbers wrap Vars, so they own mixed arithmetic
    return hasattr(o, "d2")


class Var:
    __slots__ = ("tape", "index", "value")
    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, tape: Tape, index: int, value: np.ndarray):
        self.tape = tape
        self.index = index
        self.value = value

    def __repr__(self):
        return f"Var(#{self.index}, shape={self.shape})"

    @property
    def shape(self):
        return np.shape(self.value)

    @property
    def ndim(self):
        return np.ndim(self.value)

    @property
    def T(self):
        return transpose(self)

    def __add__(self, o):
        if _defers(o):
            return NotImplemented
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        if _defers(o):
            return NotImplemented
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        if _defers(o):
            return NotImplemented
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        if _defers(o):
            return NotImplemented
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, o):
        if _defers(o):
            return NotImplemented
        return matmul(self, o)

    def __rmatmul__(self, o):
        return matmul(o, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def max(self, axis=-1):
        return max_(self, axis)

    def exp(self):
        return exp(self)

    def sin(self):
        return sin(self)

    def cos(self):
        return cos(self)

    def tanh(self):
        return tanh(self)

    def square(self):
        return square(self)

    def sigmoid(self):
        return sigmoid(self)

    def relu(self):
        return relu(self)


def value_of(x):
    return x.value if isinstance(x, Var) else x


def _tape_of(*xs) -> Tape:
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    raise TypeError("operation needs at least one Var operand")


def _make(op, value, pairs) -> Var:
    tape = _tape_of(*(v for v, _ in pairs))
    parents = []
    for v, fn in pairs:
        if isinstance(v, Var):
            if v.tape is not tape:
                raise ValueError(f"{op}: operands belong to different tapes")
            parents.append((v.index, fn))
    return tape._record(op, value, parents)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------- arithmetic

def add(a, b):
    av, bv = value_of(a), value_of(b)
    sa, sb = np.shape(av), np.shape(bv)
    return _make("add", np.add(av, bv), [
        (a, lambda g: _unbroadcast(g, sa)),
        (b, lambda g: _unbroadcast(g, sb)),
    ])


def sub(a, b):
    av, bv = value_of(a), value_of(b)
    sa, sb = np.shape(av), np.shape(bv)
    return _make("sub", np.subtract(av, bv), [
        (a, lambda g: _unbroadcast(g, sa)),
        (b, lambda g: -_unbroadcast(g, sb)),
    ])


def mul(a, b):
    av, bv = value_of(a), value_of(b)
    sa, sb = np.shape(av), np.shape(bv)
    return _make("mul", np.multiply(av, bv), [
        (a, lambda g: _unbroadcast(g * bv, sa)),
        (b, lambda g: _unbroadcast(g * av, sb)),
    ])


def div(a, b):
    av, bv = value_of(a), value_of(b)
    sa, sb = np.shape(av), np.shape(bv)
    out = np.divide(av, bv)
    return _make("div", out, [
        (a, lambda g: _unbroadcast(g / bv, sa)),
        (b, lambda g: _unbroadcast(-g * out / bv, sb)),
    ])


def matmul(a, b):
    """2-D product, or a stacked product of two equal-rank arrays with matching
    leading extents (numpy ``matmul`` semantics without batch broadcasting)."""
    av, bv = value_of(a), value_of(b)
    na, nb = np.ndim(av), np.ndim(bv)
    if na < 2 or na != nb or av.shape[:-2] != bv.shape[:-2]:
        raise ShapeError(f"matmul: incompatible operand shapes {np.shape(av)} and {np.shape(bv)}")
    if av.shape[-1] != bv.shape[-2]:
        raise ShapeError(f"matmul: inner extents {av.shape[-1]} and {bv.shape[-2]} differ")
    return _make("matmul", av @ bv, [
        (a, lambda g: g @ np.swapaxes(bv, -1, -2)),
        (b, lambda g: np.swapaxes(av, -1, -2) @ g),
    ])


# ---------------------------------------------------------------- reductions

def _expand(g, shape, axis, keepdims):
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum_(x, axis=None, keepdims=False):
    xv = value_of(x)
    shape = xv.shape
    return _make("sum", np.sum(xv, axis=axis, keepdims=keepdims), [
        (x, lambda g: _expand(g, shape, axis, keepdims)),
    ])


def mean(x, axis=None, keepdims=False):
    xv = value_of(x)
    count = xv.size if axis is None else np.prod([xv.shape[a] for a in np.atleast_1d(axis)])
    return sum_(x, axis, keepdims) * (1.0 / count)


def max_(x, axis=-1):
    """Maximum along one axis; ties send the adjoint to the first maximiser."""
    xv = value_of(x)
    arg = np.expand_dims(np.argmax(xv, axis=axis), axis)
    out = np.take_along_axis(xv, arg, axis=axis).squeeze(axis)

    def vjp(g):
        full = np.zeros_like(xv)
        np.put_along_axis(full, arg, np.expand_dims(g, axis), axis=axis)
        return full

    return _make("max", out, [(x, vjp)])


# ---------------------------------------------------------------- elementwise

def exp(x):
    out = np.exp(value_of(x))
    return _make("exp", out, [(x, lambda g: g * out)])


def sin(x):
    xv = value_of(x)
    return _make("sin", np.sin(xv), [(x, lambda g: g * np.cos(xv))])


def cos(x):
    xv = value_of(x)
    return _make("cos", np.cos(xv), [(x, lambda g: -g * np.sin(xv))])


def tanh(x):
    out = np.tanh(value_of(x))
    return _make("tanh", out, [(x, lambda g: g * (1.0 - out * out))])


def square(x):
    xv = value_of(x)
    return _make("square", xv * xv, [(x, lambda g: 2.0 * g * xv)])


def sigmoid(x):
    out = 0.5 * (1.0 + np.tanh(0.5 * value_of(x)))
    return _make("sigmoid", out, [(x, lambda g: g * out * (1.0 - out))])


def relu(x):
    xv = value_of(x)
    return _make("relu", np.maximum(xv, 0.0), [(x, lambda g: g * (xv > 0.0))])


# ---------------------------------------------------------------- structural

def reshape(x, shape):
    xv = value_of(x)
    old = xv.shape
    return _make("reshape", xv.reshape(shape), [(x, lambda g: g.reshape(old))])


def transpose(x, axes=None):
    xv = value_of(x)
    inv = None if axes is None else np.argsort(axes)
    return _make("transpose", np.transpose(xv, axes), [(x, lambda g: np.transpose(g, inv))])


def getitem(x, idx):
    xv = value_of(x)
    fancy = any(isinstance(i, (np.ndarray, list)) for i in (idx if isinstance(idx, tuple) else (idx,)))

    def vjp(g):
        full = np.zeros_like(xv)
        if fancy:
            np.add.at(full, idx, g)
        else:
            full[idx] = g
        return full

    return _make("getitem", xv[idx], [(x, vjp)])


def concat(xs, axis=-1):
    vals = [value_of(x) for x in xs]
    cuts = np.cumsum([v.shape[axis] for v in vals])[:-1]

    def piece(k):
        return lambda g: np.split(g, cuts, axis=axis)[k]

    return _make("concat", np.concatenate(vals, axis=axis), [(x, piece(k)) for k, x in enumerate(xs)])


def patches(x, kh: int, kw: int):
    """Valid-mode sliding windows of an NHWC batch: [B,H,W,C] -> [B,H',W',kh,kw,C]."""
    xv = value_of(x)
    b, h, w, c = xv.shape
    ho, wo = h - kh + 1, w - kw + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"{kh}x{kw} window does not fit a {h}x{w} image")
    view = np.lib.stride_tricks.sliding_window_view(xv, (kh, kw), axis=(1, 2))
    out = np.ascontiguousarray(view.transpose(0, 1, 2, 4, 5, 3))

    def vjp(g):
        full = np.zeros_like(xv)
        for i in range(kh):
            for j in range(kw):
                full[:, i:i + ho, j:j + wo, :] += g[:, :, :, i, j, :]
        return full

    return _make("patches", out, [(x, vjp)])


# ---------------------------------------------------------------- backward

def backward(tape: Tape, root: Var) -> dict[str, np.ndarray]:
    """Gradient of a scalar ``root`` with respect to every trainable leaf.

    Adjoints from multiple uses of a node are summed. Leaves the root does
    not depend on get zero gradients.
    """
    if root.tape is not tape:
        raise ValueError("root does not belong to this tape")
    if np.size(root.value) != 1:
        raise ShapeError(f"backward needs a scalar root, got shape {root.shape}")
    adj: list = [None] * (root.index + 1)
    adj[root.index] = np.ones_like(root.value)
    nodes = tape.nodes
    for i in range(root.index, -1, -1):
        g = adj[i]
        if g is None:
            continue
        for p, vjp in nodes[i].parents:
            gp = vjp(g)
            adj[p] = gp if adj[p] is None else adj[p] + gp
        if nodes[i].parents:
            adj[i] = None
    grads = {}
    for idx, (name, trainable, shape) in tape.leaves.items():
        if not trainable:
            continue
        g = adj[idx] if idx <= root.index else None
        if g is None:
            grads[name] = np.zeros(shape)
        else:
            grads[name] = check_finite(np.array(g, dtype=np.float64), "backward", idx)
    return grads
