"""Two-dimensional regression targets of graded difficulty.

T(x) = sin(pi x1) sin(pi x2) - a (sinh x1 + sinh x2) + b U(x) + c N(x)

``U`` is a plateau of height 1/1.5 on [-3.5, -2] x [2, 3] and ``N`` a normal
density at the origin with the covariance printed as [[0.6, 2.0], [1.1, 3.9]].
That matrix is not symmetric; it is used verbatim (inverse and determinant of
the printed matrix). The quadratic form of a matrix only sees its symmetric
part, so the exponent agrees with the symmetrised reading.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine import Rng
from .dataset import Dataset

PRINTED_SIGMA = np.array([[0.6, 2.0], [1.1, 3.9]])
BUMP_MEAN = np.zeros(2)
FIT_DOMAIN = (-4.0, 4.0)


@dataclass(frozen=True)
class FitLevel:
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0


LEVELS = (FitLevel(0, 0, 0), FitLevel(5, 0, 0), FitLevel(5, 0.1, 0), FitLevel(5, 0.1, 40))


def plateau(x1, x2):
    inside = (x1 >= -3.5) & (x1 <= -2.0) & (x2 >= 2.0) & (x2 <= 3.0)
    return np.where(inside, 1.0 / 1.5, 0.0)


def gaussian_density(x, mu, sigma) -> np.ndarray:
    """Normalised multivariate normal density; ``x`` is [d] or [N x d]."""
    sigma = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    det = np.linalg.det(sigma)
    if not det > 0 or not np.isfinite(det):
        raise np.linalg.LinAlgError(f"covariance is singular or not positive definite (det={det})")
    d = mu.size
    z = np.asarray(x, dtype=np.float64).reshape(-1, d) - mu
    quad = np.einsum("ni,ij,nj->n", z, np.linalg.inv(sigma), z)
    dens = np.exp(-0.5 * quad) / np.sqrt((2 * np.pi) ** d * det)
    return dens[0] if np.ndim(x) == 1 else dens


def target_2d(x, level: FitLevel):
    """Target value for one point [2] or a batch [N x 2]."""
    x = np.asarray(x, dtype=np.float64)
    x1, x2 = x[..., 0], x[..., 1]
    out = np.sin(np.pi * x1) * np.sin(np.pi * x2) - level.a * (np.sinh(x1) + np.sinh(x2))
    if level.b:
        out = out + level.b * plateau(x1, x2)
    if level.c:
        out = out + level.c * gaussian_density(x.reshape(-1, 2), BUMP_MEAN, PRINTED_SIGMA).reshape(x1.shape)
    return float(out) if np.ndim(out) == 0 else out


def sample_fit_dataset(level: FitLevel, n_train: int = 2000, n_test: int = 500, rng: Rng | None = None,
                       seed: int = 0) -> Dataset:
    if n_train < 1 or n_test < 1:
        raise ValueError("sample counts must be positive")
    rng = rng or Rng(seed)
    X = rng.uniform((n_train + n_test, 2), *FIT_DOMAIN)
    Y = target_2d(X, level).reshape(-1, 1)
    return Dataset(X, Y, np.arange(n_train), np.arange(n_train, n_train + n_test), seed=rng.seed)
