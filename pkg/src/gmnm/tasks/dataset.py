from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise ValueError(f"{len(self.inputs)} inputs but {len(self.targets)} targets")
        both = np.concatenate([self.train_idx, self.test_idx])
        if len(np.unique(both)) != len(both) or len(both) != len(self.inputs):
            raise ValueError("train/test partition must be disjoint and exhaustive")

    @property
    def train_inputs(self):
        return self.inputs[self.train_idx]

    @property
    def train_targets(self):
        return self.targets[self.train_idx]

    @property
    def test_inputs(self):
        return self.inputs[self.test_idx]

    @property
    def test_targets(self):
        return self.targets[self.test_idx]


def save_csv(dataset: Dataset, path) -> None:
    """Flat CSV: split column, input columns, then target columns."""
    X = dataset.inputs.reshape(len(dataset.inputs), -1)
    Y = dataset.targets.reshape(len(dataset.targets), -1)
    split = np.zeros(len(X), dtype=int)
    split[dataset.test_idx] = 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["split"] + [f"x{i}" for i in range(X.shape[1])] + [f"y{i}" for i in range(Y.shape[1])])
        for s, xr, yr in zip(split, X, Y):
            w.writerow([s] + [f"{v:.17g}" for v in xr] + [f"{v:.17g}" for v in yr])


def load_csv(path, input_shape=None) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=np.float64)
    nx = sum(1 for h in header if h.startswith("x"))
    split = body[:, 0].astype(int)
    X, Y = body[:, 1:1 + nx], body[:, 1 + nx:]
    if input_shape is not None:
        X = X.reshape(len(X), *input_shape)
    return Dataset(X, Y, np.flatnonzero(split == 0), np.flatnonzero(split == 1))
