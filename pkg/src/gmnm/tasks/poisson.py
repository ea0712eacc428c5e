"""Poisson problem on [-1, 1]^2 with zero boundary values.

Laplacian of the solution is -2 pi^2 sin(pi x) sin(pi y); the solution itself,
sin(pi x) sin(pi y), is only used for error measurement. Models expose
``value(P, X)`` and ``laplacian(P, X)`` returning [N x 1].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine import Rng, fn


@dataclass
class PdeConfig:
    n_interior: int = 1024
    n_boundary: int = 256
    grid: int = 101
    resample: bool = True
    boundary_weight: float = 1.0

    def __post_init__(self):
        if self.n_interior < 1 or self.n_boundary < 1:
            raise ValueError("collocation counts must be >= 1")
        if self.boundary_weight <= 0:
            raise ValueError("boundary_weight must be positive")


def sinpi(x):
    """sin(pi x), reduced about the nearest integer so it vanishes exactly on integers."""
    n = np.round(x)
    return np.where(np.remainder(n, 2.0) == 0.0, 1.0, -1.0) * np.sin(np.pi * (x - n))


def exact_solution(X):
    return sinpi(X[:, 0]) * sinpi(X[:, 1])


def source(X):
    return -2.0 * np.pi ** 2 * exact_solution(X)


def sample_interior(n: int, rng: Rng) -> np.ndarray:
    return rng.uniform((n, 2), -1.0, 1.0)


def sample_boundary(n: int, rng: Rng) -> np.ndarray:
    """Points spread evenly over the four edges, uniform along each edge."""
    s = rng.uniform(n, -1.0, 1.0)
    side = np.arange(n) % 4
    x = np.where(side == 0, -1.0, np.where(side == 1, 1.0, s))
    y = np.where(side == 2, -1.0, np.where(side == 3, 1.0, s))
    return np.stack([x, y], axis=1)


def eval_grid(resolution: int) -> np.ndarray:
    """Centres of a ``resolution`` x ``resolution`` array of equal cells covering [-1, 1]^2."""
    if resolution < 1:
        raise ValueError("grid resolution must be >= 1")
    g = -1.0 + (2.0 * np.arange(resolution) + 1.0) / resolution
    gx, gy = np.meshgrid(g, g, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def pde_terms(model, P, interior, boundary):
    """(boundary MSE, residual MSE) as arrays or tape variables."""
    b = model.value(P, boundary)
    r = model.laplacian(P, interior) - source(interior).reshape(-1, 1)
    return fn.square(b).mean(), fn.square(r).mean()


def pde_losses(model, pde: PdeConfig, rng: Rng, P=None):
    """Sample collocation points and return (boundary_mse, residual_mse)."""
    P = model.params if P is None else P
    interior = sample_interior(pde.n_interior, rng)
    boundary = sample_boundary(pde.n_boundary, rng)
    bmse, rmse = pde_terms(model, P, interior, boundary)
    return float(bmse), float(rmse)


def l2_error(model, grid_resolution: int = 101, P=None) -> float:
    """Root-mean-square difference to the exact solution on a uniform grid."""
    P = model.params if P is None else P
    X = eval_grid(grid_resolution)
    err = np.asarray(model.value(P, X)).reshape(-1) - exact_solution(X)
    return float(np.sqrt(np.mean(err * err)))


class ExactSolution:
    """Hand-coded solution with its analytic Laplacian."""

    params: dict = {}

    def value(self, P, X):
        return exact_solution(X).reshape(-1, 1)

    def laplacian(self, P, X):
        return source(X).reshape(-1, 1)


class ZeroModel:
    params: dict = {}

    def value(self, P, X):
        return np.zeros((len(X), 1))

    def laplacian(self, P, X):
        return np.zeros((len(X), 1))
