"""Small randomised problems for the finite-difference gradient check.

Each kind builds a compact model with non-trivial parameters (mixing weights
are drawn at random instead of the zero initialisation) and a scalar objective
that exercises its full forward path.
"""
from __future__ import annotations

import numpy as np

from . import nets
from .engine import BlockReport, Rng, check_gradients, fn
from .mixture import GmnmConfig
from .models import ConvModel, GmnmModel, LstmModel, MlpModel, RbfModel

KINDS = ("gmnm-ridge", "gmnm-quadratic", "mlp", "rbf", "conv+gmnm-head", "lstm+gmnm")
FAIL_THRESHOLD = 1e-4  # the CLI exits nonzero above this relative error


class UnknownKindError(ValueError):
    pass


def _randomise(model, rng: Rng, names):
    for k in names:
        model.params[k] = rng.normal(model.params[k].shape)


def _mse(pred, target):
    return fn.square(pred - target).mean()


def gradcheck_problem(kind: str, seed: int = 0):
    """Return ``(objective, params, frozen)`` for one check."""
    rng = Rng(seed)
    if kind in ("gmnm-ridge", "gmnm-quadratic"):
        mode = kind.split("-")[1]
        d = 2 if mode == "ridge" else 3
        model = GmnmModel(GmnmConfig(d=d, m=3, mode=mode, out_dim=2 if mode == "quadratic" else 1), rng)
        _randomise(model, rng, ["Pi", "b", "beta_raw"])
        X = rng.uniform((6, d), -1.0, 1.0)
        Y = rng.normal((6, model.config.out_dim))
        if mode == "ridge":
            S = rng.normal((6, 1))

            def objective(P):
                # value fit plus a Laplacian residual, as in the PDE loss
                return _mse(model.value(P, X), Y) + 0.1 * _mse(model.laplacian(P, X), S)
        else:
            def objective(P):
                return _mse(model.forward(P, X), Y)
    elif kind == "mlp":
        model = MlpModel(nets.MlpSpec([2, 5, 4, 1]), rng)
        _randomise(model, rng, ["b0", "b1", "b2"])
        X = rng.uniform((5, 2), -1.0, 1.0)
        Y, S = rng.normal((5, 1)), rng.normal((5, 1))

        def objective(P):
            return _mse(model.value(P, X), Y) + 0.1 * _mse(model.laplacian(P, X), S)
    elif kind == "rbf":
        model = RbfModel(rng, 4, 2, 2, (-1.0, 1.0), 0.7)
        _randomise(model, rng, ["weights"])
        X = rng.uniform((6, 2), -1.0, 1.0)
        Y = rng.normal((6, 2))

        def objective(P):
            return _mse(model.forward(P, X), Y)
    elif kind == "conv+gmnm-head":
        spec = nets.ConvSpec(image=(10, 10, 1), channels=(2, 3), classes=3, head="gmnm", gmnm={"m": 4})
        images = rng.uniform((8, 10, 10, 1))
        model = ConvModel(spec, rng, images)
        _randomise(model, rng, ["head.Pi", "kb0", "kb1"])
        X = images[:3]
        Y = rng.normal((3, 3))

        def objective(P):
            return _mse(model.forward(P, X), Y)
    elif kind == "lstm+gmnm":
        spec = nets.LstmSpec(features=4, units=3, gmnm={"m": 4})
        model = LstmModel(spec, rng)
        _randomise(model, rng, ["post.Pi"])
        X = rng.normal((4, 5, 4))  # T = 5
        Y = rng.normal((4, 1))

        def objective(P):
            return _mse(model.forward(P, X), Y)
    else:
        raise UnknownKindError(f"unsupported model kind {kind!r}; choose from {', '.join(KINDS)}")
    return objective, model.params, model.frozen


def run_gradcheck(kind: str, seed: int = 0) -> list[BlockReport]:
    objective, params, frozen = gradcheck_problem(kind, seed)
    return check_gradients(objective, params, frozen)
