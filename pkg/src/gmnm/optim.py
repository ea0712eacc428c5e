"""Optimisers, the training loop and run records."""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import NonFiniteError, Rng, ShapeError, Tape, backward


class TrainingAborted(RuntimeError):
    """Loss became non-finite; ``step`` is the step being taken."""

    def __init__(self, step: int, cause: Exception | None = None):
        self.step = step
        super().__init__(f"non-finite loss at step {step}" + (f": {cause}" if cause else ""))


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict, grads: dict) -> dict:
    """One bias-corrected Adam update of every parameter present in ``grads``.

    Parameters missing from ``grads`` (frozen ones) are returned untouched.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    out = dict(params)
    for name, g in grads.items():
        p = params[name]
        if np.shape(g) != np.shape(p):
            raise ShapeError(f"gradient for {name!r} has shape {np.shape(g)}, parameter {np.shape(p)}")
        m = state.m.get(name)
        v = state.v.get(name)
        m = (1.0 - b1) * g if m is None else b1 * m + (1.0 - b1) * g
        v = (1.0 - b2) * g * g if v is None else b2 * v + (1.0 - b2) * g * g
        state.m[name], state.v[name] = m, v
        out[name] = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return out


@dataclass
class SgdState:
    lr: float = 1e-2
    t: int = 0


def sgd_step(state: SgdState, params: dict, grads: dict) -> dict:
    state.t += 1
    out = dict(params)
    for name, g in grads.items():
        out[name] = params[name] - state.lr * g
    return out


def make_optimizer(name: str = "adam", lr: float = 1e-3):
    if name == "adam":
        return AdamState(lr=lr)
    if name == "sgd":
        return SgdState(lr=lr)
    raise ValueError(f"unknown optimizer {name!r}")


def optimizer_step(state, params, grads):
    if isinstance(state, AdamState):
        return adam_step(state, params, grads)
    return sgd_step(state, params, grads)


@dataclass
class TrainBudget:
    """Either ``steps`` (full-batch or fixed minibatch steps) or ``epochs``."""

    steps: int | None = None
    epochs: int | None = None
    batch_size: int | None = None
    eval_every: int = 100
    seed: int = 0

    def __post_init__(self):
        if (self.steps is None) == (self.epochs is None):
            raise ValueError("give exactly one of steps or epochs")
        if (self.steps or 0) < 0 or (self.epochs or 0) < 0:
            raise ValueError("budget must be non-negative")
        if self.eval_every < 1:
            raise ValueError("eval_every must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")


@dataclass
class RunRecord:
    rows: list = field(default_factory=list)
    param_count: int = 0
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)
    config_text: str = ""

    COLUMNS = ("step", "train_loss", "test_loss")

    def append(self, step: int, **metrics):
        if self.rows and step <= self.rows[-1]["step"]:
            raise ValueError(f"step {step} does not increase on {self.rows[-1]['step']}")
        self.rows.append({"step": int(step), **{k: float(v) for k, v in metrics.items()}})

    def series(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows if key in r])

    def columns(self) -> list:
        extra = []
        for r in self.rows:
            extra += [k for k in r if k not in self.COLUMNS and k not in extra]
        return list(self.COLUMNS) + extra

    def summary(self) -> dict:
        out = {"steps": self.rows[-1]["step"] if self.rows else 0}
        for key in self.columns()[1:]:
            s = self.series(key)
            if s.size:
                out[f"min_{key}"] = float(s.min())
                out[f"final_{key}"] = float(s[-1])
        out["param_count"] = int(self.param_count)
        out["wall_time"] = float(self.wall_time)
        out["config"] = self.config
        if self.config_text:
            out["config_text"] = self.config_text
        return out

    @property
    def min_test_loss(self) -> float:
        return float(self.series("test_loss").min())

    def write(self, out_dir) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        cols = self.columns()
        with open(out_dir / "metrics.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in self.rows:
                w.writerow([r["step"]] + [_fmt(r.get(c)) for c in cols[1:]])
        (out_dir / "summary.json").write_text(json.dumps(self.summary(), indent=2))

    @classmethod
    def read(cls, out_dir) -> "RunRecord":
        out_dir = Path(out_dir)
        summary = json.loads((out_dir / "summary.json").read_text())
        rec = cls(param_count=summary["param_count"], wall_time=summary["wall_time"], config=summary["config"],
                  config_text=summary.get("config_text", ""))
        with open(out_dir / "metrics.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                step = int(row.pop("step"))
                rec.append(step, **{k: float(v) for k, v in row.items() if v != ""})
        return rec


def _fmt(v):
    return "" if v is None else f"{v:.17g}"


class Model:
    """Named parameter arrays, a frozen subset and a forward function.

    ``forward(P, X)`` must accept ``P`` holding arrays or tape variables.
    """

    def __init__(self, params: dict, forward, frozen=(), name: str = "model"):
        self.params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
        self.forward = forward
        self.frozen = frozenset(frozen)
        self.name = name

    def param_count(self) -> int:
        return int(sum(np.size(v) for k, v in self.params.items() if k not in self.frozen))

    def predict(self, X, chunk: int = 4096) -> np.ndarray:
        X = np.asarray(X)
        if len(X) <= chunk:
            return np.asarray(self.forward(self.params, X))
        return np.concatenate([np.asarray(self.forward(self.params, X[i:i + chunk]))
                               for i in range(0, len(X), chunk)])


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    for i in range(0, n, batch_size):
        yield order[i:i + batch_size]


def train(model: Model, dataset, loss_kind: str, optimizer, budget: TrainBudget, *,
          objective=None, evaluate=None, record: RunRecord | None = None, log=None) -> RunRecord:
    """Optimise ``model.params`` in place and record losses every ``eval_every`` steps.

    ``objective(P, X, Y, rng)`` overrides the default ``loss(loss_kind,
    forward(P, X), Y)``; ``evaluate(model)`` returns the metrics dict logged at
    each evaluation (default: train and test loss on the dataset split).
    """
    from .nets import loss as loss_fn

    rng = Rng(budget.seed)
    if objective is None:
        def objective(P, X, Y, rng):
            return loss_fn(loss_kind, model.forward(P, X), Y)

    if evaluate is None:
        def evaluate(model):
            return {
                "train_loss": loss_fn(loss_kind, model.predict(dataset.train_inputs), dataset.train_targets),
                "test_loss": loss_fn(loss_kind, model.predict(dataset.test_inputs), dataset.test_targets),
            }

    record = record if record is not None else RunRecord()
    record.param_count = model.param_count()
    frozen_before = {k: model.params[k].copy() for k in model.frozen}
    X, Y = dataset.train_inputs, dataset.train_targets
    n = len(X)
    t0 = time.perf_counter()

    def log_eval(step):
        metrics = evaluate(model)
        for k, v in metrics.items():
            if not math.isfinite(v):
                raise TrainingAborted(step)
        record.append(step, **metrics)
        if log:
            log(step, metrics)

    def step_on(step, Xb, Yb):
        tape = Tape()
        P = tape.leaves_from(model.params, model.frozen)
        try:
            value = objective(P, Xb, Yb, rng)
            grads = backward(tape, value)
        except NonFiniteError as exc:
            raise TrainingAborted(step, exc) from exc
        model.params = optimizer_step(optimizer, model.params, grads)

    log_eval(0)
    step = 0
    if budget.steps is not None:
        full = budget.batch_size is None or budget.batch_size >= n
        it = None
        while step < budget.steps:
            if full:
                idx = None
            else:
                if it is None:
                    it = _batches(n, budget.batch_size, rng)
                idx = next(it, None)
                if idx is None:
                    it = _batches(n, budget.batch_size, rng)
                    idx = next(it)
            step += 1
            step_on(step, X if idx is None else X[idx], Y if idx is None else Y[idx])
            if step % budget.eval_every == 0 or step == budget.steps:
                log_eval(step)
    else:
        bs = budget.batch_size or n
        for _ in range(budget.epochs):
            for idx in _batches(n, bs, rng):
                step += 1
                step_on(step, X[idx], Y[idx])
                if step % budget.eval_every == 0:
                    log_eval(step)
            if record.rows[-1]["step"] != step:
                log_eval(step)

    record.wall_time = time.perf_counter() - t0
    for k, before in frozen_before.items():
        if not np.array_equal(before, model.params[k]):
            raise AssertionError(f"frozen parameter {k!r} changed during training")
    return record
