"""Dense float64 arrays, strict elementwise arithmetic and the seeded RNG.

Tensors are plain ``numpy.ndarray`` objects of dtype float64. The helpers
here enforce the two rules every public operation obeys: shapes must agree
exactly (a scalar operand is the only broadcast allowed) and results must be
finite.
"""
from __future__ import annotations

import math

import numpy as np

Tensor = np.ndarray


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    """A NaN or Inf was produced. ``op`` names the producing operation."""

    def __init__(self, op: str, node: int | None = None):
        self.op = op
        self.node = node
        where = f" (node {node})" if node is not None else ""
        super().__init__(f"non-finite value produced by '{op}'{where}")


def as_tensor(x) -> Tensor:
    """Return a read-only float64 copy of ``x``."""
    arr = np.array(x, dtype=np.float64)
    arr.flags.writeable = False
    return arr


def check_finite(value, op: str, node: int | None = None):
    # a single reduction is far cheaper than isfinite().all() on large arrays
    if isinstance(value, np.ndarray):
        if not math.isfinite(float(np.sum(value))) and not np.isfinite(value).all():
            raise NonFiniteError(op, node)
    elif not math.isfinite(value):
        raise NonFiniteError(op, node)
    return value


_BINOPS = {"add": np.add, "sub": np.subtract, "mul": np.multiply}


def tensor_binop(kind: str, a, b) -> Tensor:
    """Elementwise ``add``/``sub``/``mul`` of equal shapes or tensor-with-scalar."""
    try:
        fn = _BINOPS[kind]
    except KeyError:
        raise ValueError(f"unknown binop {kind!r}") from None
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise ShapeError(f"{kind}: shapes {a.shape} and {b.shape} differ")
    if a.size == 1 and b.size != 1:
        a = a.reshape(())
    elif b.size == 1 and a.size != 1:
        b = b.reshape(())
    out = fn(a, b)
    return check_finite(out, kind)


def matmul(a, b) -> Tensor:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner extents {a.shape[1]} and {b.shape[0]} differ")
    return check_finite(a @ b, "matmul")


class Rng:
    """Counter-based (Philox) generator; the same seed yields the same stream
    on every platform."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def uniform(self, shape, lo: float = 0.0, hi: float = 1.0) -> Tensor:
        if not lo < hi:
            raise ValueError(f"uniform needs lo < hi, got [{lo}, {hi})")
        return self._gen.uniform(lo, hi, size=shape)

    def normal(self, shape, scale: float = 1.0) -> Tensor:
        return self._gen.normal(0.0, scale, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)

    def spawn(self, key: int) -> "Rng":
        """Independent child stream, deterministic in (seed, key)."""
        return Rng(int(np.random.SeedSequence([self.seed, key]).generate_state(1, np.uint64)[0]))


def rng_uniform(rng: Rng, shape, lo: float, hi: float) -> Tensor:
    return rng.uniform(shape, lo, hi)
