"""Synthetic forecasting task built from four phase-locked sinusoids.

x_i(t) = a_i sin t + b_i
y(t)   = x3(t) x4(t-0.1) - x3(t-0.5) x1(t-0.1) + x4(t) x3(t) - x2(t-0.5) x1(t-0.2)

Each sample holds the four signals at the ``window`` most recent lags
t - k dt (k = window-1 .. 0), evaluated in closed form. With dt = 0.1 every
delay in the target lands on a lag, so the target is a function of the window.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset

DELAYS = (0.1, 0.2, 0.5)


@dataclass
class TsConfig:
    a: tuple = (1.0, 0.8, 1.2, 0.6)
    b: tuple = (0.5, -0.3, 0.2, 0.9)
    n_samples: int = 10000
    split: float = 0.8
    t_min: float = 0.5
    t_max: float = 100.0
    window: int = 10
    dt: float = 0.1

    def __post_init__(self):
        self.a = tuple(float(v) for v in self.a)
        self.b = tuple(float(v) for v in self.b)
        if len(self.a) != 4 or len(self.b) != 4:
            raise ValueError("need four a and four b coefficients")
        if not 0.0 < self.split < 1.0:
            raise ValueError("split must lie in (0, 1)")
        if self.n_samples < 2 or self.window < 1 or self.dt <= 0:
            raise ValueError("invalid sampling parameters")


def check_delays(cfg: TsConfig):
    for d in DELAYS:
        k = d / cfg.dt
        if abs(k - round(k)) > 1e-9:
            raise ValueError(f"delay {d} is not a multiple of dt={cfg.dt}")
        if round(k) > cfg.window - 1:
            raise ValueError(f"delay {d} reaches beyond a {cfg.window}-step window")


def signals(t, cfg: TsConfig) -> np.ndarray:
    """x_i(t) for an array of times; returns [..., 4]."""
    t = np.asarray(t, dtype=np.float64)[..., None]
    return np.asarray(cfg.a) * np.sin(t) + np.asarray(cfg.b)


def target(t, cfg: TsConfig):
    def x(i, lag=0.0):
        return signals(np.asarray(t) - lag, cfg)[..., i - 1]

    return x(3) * x(4, 0.1) - x(3, 0.5) * x(1, 0.1) + x(4) * x(3) - x(2, 0.5) * x(1, 0.2)


def sample_times(cfg: TsConfig) -> np.ndarray:
    return np.linspace(cfg.t_min, cfg.t_max, cfg.n_samples)


def ts_generate(cfg: TsConfig | None = None) -> Dataset:
    cfg = cfg or TsConfig()
    check_delays(cfg)
    t = sample_times(cfg)
    lags = cfg.dt * np.arange(cfg.window - 1, -1, -1)
    inputs = signals(t[:, None] - lags[None, :], cfg)  # [N, window, 4]
    targets = target(t, cfg).reshape(-1, 1)
    n_train = int(round(cfg.split * cfg.n_samples))
    return Dataset(inputs, targets, np.arange(n_train), np.arange(n_train, cfg.n_samples))
