"""Config-driven experiment runs.

A run is described by a flat ``key = value`` text file whose keys carry a
dotted section prefix::

    name = pde-gmnm
    task = pde
    seed = 0
    output = runs/pde-gmnm
    model.kind = gmnm
    model.m = 900
    model.minimal_ridge = true
    optim.lr = 3e-4
    budget.steps = 20000
    pde.boundary_weight = 100

Values are read as JSON when possible (numbers, ``true``/``false``, lists);
a bare comma-separated value becomes a list and anything else stays a string.
Top-level keys: ``name``, ``task`` (fit2d, pde, timeseries, mnist), ``seed``,
``output`` and ``cache`` (optional CSV path: generated fit2d/timeseries data
is loaded from it when present and written to it otherwise). Sections: ``model``, ``optim`` (``name``, ``lr``), ``budget``
(``steps`` or ``epochs``, ``batch_size``, ``eval_every``) and one task section
(``fit``, ``pde``, ``ts`` or ``mnist``) whose keys are the fields of the
matching task config.
"""
from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nets
from .engine import Rng
from .mixture import GmnmConfig
from .models import ConvModel, GmnmModel, LstmModel, MlpModel, RbfModel
from .optim import RunRecord, TrainBudget, make_optimizer, train
from .snapshot import dump_arrays
from .tasks import poisson
from .tasks.dataset import Dataset, load_csv, save_csv
from .tasks.fit2d import FIT_DOMAIN, FitLevel, sample_fit_dataset
from .tasks.mnist import data_root, mnist_split
from .tasks.timeseries import TsConfig, ts_generate

TASKS = ("fit2d", "pde", "timeseries", "mnist")
TASK_SECTION = {"fit2d": "fit", "pde": "pde", "timeseries": "ts", "mnist": "mnist"}
TOP_KEYS = ("name", "task", "seed", "output", "cache")
MODEL_KINDS = {
    "fit2d": ("gmnm", "mlp", "rbf"),
    "pde": ("gmnm", "mlp"),
    "timeseries": ("lstm",),
    "mnist": ("cnn",),
}
# full batch with lr 1e-2 for fitting and PDE, lr 1e-3 minibatches elsewhere
DEFAULTS = {
    "fit2d": {"optim": {"lr": 1e-2}, "budget": {"steps": 2000}},
    "pde": {"optim": {"lr": 1e-2}, "budget": {"steps": 20000}},
    "timeseries": {"optim": {"lr": 1e-3}, "budget": {"epochs": 50, "batch_size": 128}},
    "mnist": {"optim": {"lr": 1e-3}, "budget": {"epochs": 40, "batch_size": 64}},
}


class ConfigError(ValueError):
    """The config text could not be parsed or names unknown keys."""


class DataMissingError(FileNotFoundError):
    """A dataset file the run depends on is absent."""


@dataclass
class FitOptions:
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    n_train: int = 2000
    n_test: int = 500


@dataclass
class MnistOptions:
    root: str | None = None
    train_limit: int | None = 10000
    test_limit: int | None = None


TASK_OPTIONS = {"fit2d": FitOptions, "pde": poisson.PdeConfig, "timeseries": TsConfig, "mnist": MnistOptions}


@dataclass
class ExperimentConfig:
    task: str
    name: str = "run"
    seed: int = 0
    output: str = "runs/run"
    model: dict = field(default_factory=dict)
    optim: dict = field(default_factory=dict)
    budget: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    text: str = ""
    cache: str | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        kinds = MODEL_KINDS[self.task]
        self.model.setdefault("kind", kinds[0])
        if self.model["kind"] not in kinds:
            raise ConfigError(f"model.kind for {self.task} must be one of {kinds}")
        unknown = set(self.optim) - {"name", "lr"}
        if unknown:
            raise ConfigError(f"unknown optim keys {sorted(unknown)}")
        for sec in ("optim", "budget"):
            merged = dict(DEFAULTS[self.task][sec])
            if sec == "budget" and ("steps" in self.budget or "epochs" in self.budget):
                merged.pop("steps", None)
                merged.pop("epochs", None)
            merged.update(getattr(self, sec))
            setattr(self, sec, merged)
        try:
            self.task_options()
            self.train_budget()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def task_options(self):
        return TASK_OPTIONS[self.task](**self.options)

    def train_budget(self) -> TrainBudget:
        return TrainBudget(seed=self.seed, **self.budget)

    def flat(self) -> dict:
        out = {"name": self.name, "task": self.task, "seed": self.seed, "output": self.output}
        if self.cache is not None:
            out["cache"] = self.cache
        for sec, values in (("model", self.model), ("optim", self.optim), ("budget", self.budget),
                            (TASK_SECTION[self.task], self.options)):
            out.update({f"{sec}.{k}": v for k, v in values.items()})
        return out


def _coerce(raw: str):
    raw = raw.strip()
    try:
        return json.loads(raw)
    except ValueError:
        pass
    if "," in raw:
        return [_coerce(part) for part in raw.split(",")]
    return raw


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    top, sections = {}, {"model": {}, "optim": {}, "budget": {}}
    task_sections = set(TASK_SECTION.values())
    for key, raw in parser["run"].items():
        value = _coerce(raw)
        if "." not in key:
            if key not in TOP_KEYS:
                raise ConfigError(f"unknown key {key!r}")
            top[key] = value
            continue
        sec, sub = key.split(".", 1)
        if sec not in sections and sec not in task_sections:
            raise ConfigError(f"unknown section {sec!r} in key {key!r}")
        sections.setdefault(sec, {})[sub] = value
    if "task" not in top:
        raise ConfigError("config needs a task")
    task = top["task"]
    if task not in TASKS:
        raise ConfigError(f"task must be one of {TASKS}, got {task!r}")
    stray = [s for s in sections if s in task_sections and s != TASK_SECTION[task]]
    if stray:
        raise ConfigError(f"sections {stray} do not apply to task {task}")
    options = sections.pop(TASK_SECTION[task], {})
    if not isinstance(top.get("seed", 0), int):
        raise ConfigError("seed must be an integer")
    name = str(top.get("name", task))
    return ExperimentConfig(task=task, name=name, seed=top.get("seed", 0),
                            output=str(top.get("output", f"runs/{name}")), options=options, text=text,
                            cache=None if top.get("cache") is None else str(top["cache"]), **sections)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


# ---------------------------------------------------------------- model builders

def _gmnm_config(model: dict, d: int, domain) -> GmnmConfig:
    opts = {k: v for k, v in model.items() if k != "kind"}
    opts.setdefault("domain", [list(domain)] * d)
    return GmnmConfig(d=d, **opts)


def _mlp(model: dict, rng: Rng, d: int):
    widths = model.get("widths", [d, 50, 50, 50, 1])
    return MlpModel(nets.MlpSpec(list(widths), model.get("activation", "tanh")), rng)


def build_fit_model(model: dict, rng: Rng):
    kind = model["kind"]
    if kind == "gmnm":
        return GmnmModel(_gmnm_config(model, 2, FIT_DOMAIN), rng)
    if kind == "mlp":
        return _mlp(model, rng, 2)
    return RbfModel(rng, int(model.get("m", 100)), 2, 1, FIT_DOMAIN, float(model.get("width", 0.5)))


def build_pde_model(model: dict, rng: Rng):
    if model["kind"] == "gmnm":
        return GmnmModel(_gmnm_config(model, 2, (-1.0, 1.0)), rng)
    return _mlp(model, rng, 2)


def build_lstm_model(model: dict, rng: Rng):
    gm = model.get("gmnm_m")
    spec = nets.LstmSpec(features=4, units=int(model.get("units", 3)),
                         gmnm=None if gm is None else {"m": int(gm)})
    return LstmModel(spec, rng)


def build_conv_model(model: dict, rng: Rng, head_images):
    head = model.get("head", "dense")
    spec = nets.ConvSpec(channels=tuple(model.get("channels", (21, 64) if head == "dense" else (16, 32))),
                         head=head, gmnm={"m": int(model.get("m", 29))} if head == "gmnm" else {})
    return ConvModel(spec, rng, head_images if head == "gmnm" else None)


# ---------------------------------------------------------------- task runners

def _cached(cfg: ExperimentConfig, make, input_shape=None) -> Dataset:
    if cfg.cache is None:
        return make()
    path = Path(cfg.cache)
    if path.exists():
        return load_csv(path, input_shape)
    data = make()
    path.parent.mkdir(parents=True, exist_ok=True)
    save_csv(data, path)
    return data


def run_fit2d(cfg: ExperimentConfig, log=None):
    opts = cfg.task_options()
    root = Rng(cfg.seed)
    data = _cached(cfg, lambda: sample_fit_dataset(FitLevel(opts.a, opts.b, opts.c), opts.n_train, opts.n_test,
                                                   rng=root.spawn(1)))
    model = build_fit_model(cfg.model, root.spawn(2))
    rec = train(model, data, "mse", make_optimizer(**cfg.optim), cfg.train_budget(), log=log)
    return model, rec


def run_pde(cfg: ExperimentConfig, log=None):
    pde = cfg.task_options()
    root = Rng(cfg.seed)
    model = build_pde_model(cfg.model, root.spawn(2))
    pts = root.spawn(1)
    boundary = poisson.sample_boundary(pde.n_boundary, pts)
    interior = poisson.sample_interior(pde.n_interior, pts)
    probe = poisson.sample_interior(pde.n_interior, pts)  # fixed points for logged losses
    rhs = poisson.source(interior).reshape(-1, 1)
    data = Dataset(interior, rhs, np.arange(len(interior)), np.arange(0))
    wb = pde.boundary_weight

    def objective(P, X, Y, rng):
        if pde.resample:
            X = poisson.sample_interior(pde.n_interior, rng)
        b, r = poisson.pde_terms(model, P, X, boundary)
        return r + wb * b

    def evaluate(model):
        b, r = poisson.pde_terms(model, model.params, probe, boundary)
        l2 = poisson.l2_error(model, pde.grid)
        return {"train_loss": float(r + wb * b), "test_loss": l2, "l2_error": l2,
                "boundary_mse": float(b), "residual_mse": float(r)}

    budget = cfg.train_budget()
    budget.batch_size = None
    rec = train(model, data, "mse", make_optimizer(**cfg.optim), budget,
                objective=objective, evaluate=evaluate, log=log)
    return model, rec


def run_timeseries(cfg: ExperimentConfig, log=None):
    opts = cfg.task_options()
    data = _cached(cfg, lambda: ts_generate(opts), (opts.window, 4))
    model = build_lstm_model(cfg.model, Rng(cfg.seed).spawn(2))
    rec = train(model, data, "mse", make_optimizer(**cfg.optim), cfg.train_budget(), log=log)
    return model, rec


def run_mnist(cfg: ExperimentConfig, log=None):
    opts = cfg.task_options()
    try:
        data = mnist_split(data_root(opts.root), opts.train_limit, opts.test_limit)
    except FileNotFoundError as exc:
        raise DataMissingError(str(exc)) from exc
    model = build_conv_model(cfg.model, Rng(cfg.seed).spawn(2), data.train_inputs)
    rec = train(model, data, "mse_onehot", make_optimizer(**cfg.optim), cfg.train_budget(), log=log)
    return model, rec


RUNNERS = {"fit2d": run_fit2d, "pde": run_pde, "timeseries": run_timeseries, "mnist": run_mnist}


def run_experiment(cfg: ExperimentConfig, log=None) -> RunRecord:
    """Execute ``cfg`` and write config echo, metrics, summary and params
    into ``cfg.output``."""
    try:
        model, rec = RUNNERS[cfg.task](cfg, log)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DataMissingError):
            raise
        raise ConfigError(str(exc)) from exc
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(cfg.text)
    rec.config = cfg.flat()
    rec.config["model.name"] = model.name
    rec.config_text = cfg.text
    rec.write(out)
    dump_arrays(out / "params.json", rec.config, model.params)
    return rec


__all__ = [
    "ConfigError", "DataMissingError", "ExperimentConfig", "FitOptions", "MnistOptions",
    "build_conv_model", "build_fit_model", "build_lstm_model", "build_pde_model",
    "load_config", "parse_config", "run_experiment", "run_fit2d", "run_mnist", "run_pde",
    "run_timeseries",
]
