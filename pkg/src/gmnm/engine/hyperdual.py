"""Hyper-dual numbers for exact first and second directional derivatives.

A hyper-dual value ``value + d1*e1 + d2*e2 + d2*e1e2`` with ``e1 == e2``
collapsed to one direction carries ``(f, f', f'')`` through arithmetic with no
truncation error. Components may be floats, numpy arrays (vectorised over a
batch) or tape ``Var`` objects, which is how second-order input derivatives
get differentiated again with respect to parameters.
"""
from __future__ import annotations

import numpy as np

from . import fn


class UnsupportedPrimitiveError(TypeError):
    pass


class HyperDual:
    __slots__ = ("value", "d1", "d2")
    __array_ufunc__ = None

    def __init__(self, value, d1=0.0, d2=0.0):
        self.value = value
        self.d1 = d1
        self.d2 = d2

    def __repr__(self):
        return f"HyperDual({self.value!r}, {self.d1!r}, {self.d2!r})"

    # arithmetic -----------------------------------------------------------
    def __add__(self, o):
        if isinstance(o, HyperDual):
            return HyperDual(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2)
        return HyperDual(self.value + o, self.d1, self.d2)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, HyperDual):
            return HyperDual(self.value - o.value, self.d1 - o.d1, self.d2 - o.d2)
        return HyperDual(self.value - o, self.d1, self.d2)

    def __rsub__(self, o):
        return HyperDual(o - self.value, -self.d1, -self.d2)

    def __neg__(self):
        return HyperDual(-self.value, -self.d1, -self.d2)

    def __mul__(self, o):
        if isinstance(o, HyperDual):
            return HyperDual(
                self.value * o.value,
                self.d1 * o.value + self.value * o.d1,
                self.d2 * o.value + 2.0 * (self.d1 * o.d1) + self.value * o.d2,
            )
        return HyperDual(self.value * o, self.d1 * o, self.d2 * o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, HyperDual):
            return self * o.reciprocal()
        return HyperDual(self.value / o, self.d1 / o, self.d2 / o)

    def __rtruediv__(self, o):
        return self.reciprocal() * o

    def __pow__(self, k):
        if k == 2:
            return self.square()
        if not isinstance(k, int) or k < 0:
            raise UnsupportedPrimitiveError("only non-negative integer powers are supported")
        out = HyperDual(1.0)
        for _ in range(k):
            out = out * self
        return out

    def reciprocal(self):
        r = 1.0 / self.value
        r2 = r * r
        return HyperDual(r, -r2 * self.d1, 2.0 * r2 * r * (self.d1 * self.d1) - r2 * self.d2)

    # linear maps with a constant (non-hyper-dual) operand ------------------
    def __matmul__(self, o):
        if isinstance(o, HyperDual):
            raise UnsupportedPrimitiveError("matmul between two hyper-dual operands")
        return HyperDual(self.value @ o, self.d1 @ o, self.d2 @ o)

    def __rmatmul__(self, o):
        return HyperDual(o @ self.value, o @ self.d1, o @ self.d2)

    def __getitem__(self, idx):
        return HyperDual(self.value[idx], self.d1[idx], self.d2[idx])

    def sum(self, axis=None, keepdims=False):
        return HyperDual(*(fn.sum(c, axis, keepdims) for c in (self.value, self.d1, self.d2)))

    def reshape(self, *shape):
        return HyperDual(*(fn.reshape(c, *shape) for c in (self.value, self.d1, self.d2)))

    def transpose(self, *axes):
        return HyperDual(*(c.transpose(*axes) for c in (self.value, self.d1, self.d2)))

    @property
    def T(self):
        return self.transpose()

    @property
    def shape(self):
        return np.shape(fn.value_of(self.value))

    # elementwise functions: g(u)' = g'(u) u',  g(u)'' = g''(u) u'^2 + g'(u) u''
    def _chain(self, v, g1, g2):
        return HyperDual(v, g1 * self.d1, g2 * (self.d1 * self.d1) + g1 * self.d2)

    def exp(self):
        v = fn.exp(self.value)
        return self._chain(v, v, v)

    def sin(self):
        s, c = fn.sin(self.value), fn.cos(self.value)
        return self._chain(s, c, -s)

    def cos(self):
        s, c = fn.sin(self.value), fn.cos(self.value)
        return self._chain(c, -s, -c)

    def tanh(self):
        t = fn.tanh(self.value)
        g1 = 1.0 - t * t
        return self._chain(t, g1, -2.0 * (t * g1))

    def sigmoid(self):
        s = fn.sigmoid(self.value)
        g1 = s * (1.0 - s)
        return self._chain(s, g1, g1 * (1.0 - 2.0 * s))

    def square(self):
        return HyperDual(
            fn.square(self.value),
            2.0 * (self.value * self.d1),
            2.0 * (self.d1 * self.d1) + 2.0 * (self.value * self.d2),
        )


def hyperdual_d2(f, x, k: int):
    """Value, first and second derivative of scalar ``f`` along input axis ``k``.

    ``f`` receives a 1-D object array of :class:`HyperDual` scalars and must be
    built from supported primitives (+, -, *, /, @ with constants, exp, sin,
    cos, tanh, sigmoid, square).
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if not 0 <= k < x.size:
        raise IndexError(f"direction {k} out of range for dimension {x.size}")
    seeded = np.empty(x.size, dtype=object)
    for i, xi in enumerate(x):
        seeded[i] = HyperDual(float(xi), 1.0 if i == k else 0.0, 0.0)
    try:
        out = f(seeded)
    except (TypeError, AttributeError) as exc:
        raise UnsupportedPrimitiveError(str(exc)) from exc
    if isinstance(out, np.ndarray):
        if out.size != 1:
            raise ValueError("hyperdual_d2 needs a scalar-valued function")
        out = out.reshape(()).item() if out.dtype != object else out.reshape(-1)[0]
    if not isinstance(out, HyperDual):
        return float(out), 0.0, 0.0
    return float(out.value), float(out.d1), float(out.d2)


def hyperdual_laplacian(f, x) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    return sum(hyperdual_d2(f, x, k)[2] for k in range(x.size))


def seed_direction(x, k: int) -> HyperDual:
    """Batch seed: rows of ``x`` ([N x d] array or Var) moved along axis ``k``."""
    xv = fn.value_of(x)
    d1 = np.zeros_like(xv)
    d1[..., k] = 1.0
    return HyperDual(x, d1, np.zeros_like(xv))
