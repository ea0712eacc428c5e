"""Central finite-difference oracle for tape gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tape import Tape, backward

GRAD_REL_TOL = 1e-5
GRAD_ABS_TOL = 1e-8
TINY_GRAD = 1e-6


def fd_step(x):
    return 1e-5 * np.maximum(1.0, np.abs(x))


def numerical_gradient(f, x: np.ndarray) -> np.ndarray:
    """Central differences of scalar ``f`` at ``x`` with h = 1e-5 max(1, |x|)."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, g = x.reshape(-1), grad.reshape(-1)
    steps = fd_step(flat)
    for i in range(flat.size):
        orig = flat[i]
        h = steps[i]
        flat[i] = orig + h
        up = f(x)
        flat[i] = orig - h
        down = f(x)
        flat[i] = orig
        g[i] = (up - down) / (2.0 * h)
    return grad


def gradient_error(analytic, numeric, tiny: float = TINY_GRAD) -> tuple[float, float]:
    """(max relative error over significant entries, max absolute error over
    entries whose magnitude is below ``tiny``)."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    scale = np.maximum(np.abs(a), np.abs(n))
    diff = np.abs(a - n)
    big = scale >= tiny
    rel = float(np.max(diff[big] / scale[big])) if big.any() else 0.0
    tiny = float(np.max(diff[~big])) if (~big).any() else 0.0
    return rel, tiny


@dataclass
class BlockReport:
    name: str
    size: int
    max_rel: float = 0.0
    max_abs_tiny: float = 0.0
    frozen: bool = False

    def passed(self, rtol=GRAD_REL_TOL, atol=GRAD_ABS_TOL) -> bool:
        return self.frozen or (self.max_rel < rtol and self.max_abs_tiny < atol)

    def line(self) -> str:
        if self.frozen:
            return f"{self.name:<14} frozen, skipped"
        return f"{self.name:<14} n={self.size:<6} max_rel={self.max_rel:.3e} max_abs(tiny)={self.max_abs_tiny:.3e}"


def check_gradients(objective, params: dict, frozen=()) -> list[BlockReport]:
    """Compare tape gradients of ``objective(P) -> scalar`` with finite differences.

    ``objective`` is called with a dict whose entries are tape leaves (for the
    analytic pass) or plain arrays (for the finite-difference passes).

    Entries below ``1e-6 * max(1, |objective|)`` count as near-zero: there the
    finite-difference rounding floor (about eps |objective| / h) swamps any
    relative comparison, so they are held to the absolute tolerance instead.
    """
    tape = Tape()
    P = tape.leaves_from(params, frozen)
    root = objective(P)
    grads = backward(tape, root)
    tiny = TINY_GRAD * max(1.0, abs(float(root.value)))
    reports = []
    for name, value in params.items():
        if name in frozen:
            reports.append(BlockReport(name, int(np.size(value)), frozen=True))
            continue

        def f(v, name=name):
            q = dict(params)
            q[name] = v
            return float(np.asarray(objective(q)).reshape(()))

        num = numerical_gradient(f, value)
        rel, abs_tiny = gradient_error(grads[name], num, tiny)
        reports.append(BlockReport(name, int(np.size(value)), rel, abs_tiny))
    return reports
