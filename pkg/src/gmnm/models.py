"""Factories that bind parameter dicts, forwards and frozen sets into
trainable :class:`~gmnm.optim.Model` objects."""
from __future__ import annotations

from . import nets
from .engine import Rng
from .mixture import GmnmConfig, GmnmParams, count_params, gmnm_apply, gmnm_init, ridge_laplacian, ridge_value
from .optim import Model


class GmnmModel(Model):
    """A bare GMNM used as a regressor; ridge mode also serves the PDE task."""

    def __init__(self, config: GmnmConfig, rng: Rng, data=None, params: GmnmParams | None = None):
        params = params or gmnm_init(config, rng, data)
        self.config = config
        mode = config.mode
        # ridge mode trains through the collapsed affine form (same function)
        forward = ridge_value if mode == "ridge" else (lambda P, X: gmnm_apply(P, X, mode))
        super().__init__(params.arrays(), forward, config.frozen, "gmnm")

    def param_count(self) -> int:
        return count_params(self.config)

    def gmnm_params(self) -> GmnmParams:
        return GmnmParams(self.config, **self.params)

    def value(self, P, X):
        return self.forward(P, X)

    def laplacian(self, P, X):
        if self.config.mode != "ridge":
            raise NotImplementedError("analytic Laplacian needs ridge mode")
        return ridge_laplacian(P, X)


class MlpModel(Model):
    def __init__(self, spec: nets.MlpSpec, rng: Rng):
        self.spec = spec
        act = spec.activation
        super().__init__(nets.mlp_init(spec, rng), lambda P, X: nets.mlp_forward(P, X, act), (), "mlp")

    def value(self, P, X):
        return self.forward(P, X)

    def laplacian(self, P, X):
        return nets.mlp_laplacian(P, X, self.spec.activation)


class RbfModel(Model):
    def __init__(self, rng: Rng, m: int, d: int, out_dim: int = 1, domain=(-1.0, 1.0), width: float = 0.5):
        super().__init__(nets.rbf_init(rng, m, d, out_dim, domain, width), nets.rbf_forward, (), "rbf")


class ConvModel(Model):
    def __init__(self, spec: nets.ConvSpec, rng: Rng, head_images=None):
        self.spec = spec
        params = nets.conv_init(spec, rng, head_images)
        super().__init__(params, lambda P, X: nets.conv_forward(P, X, spec), nets.conv_frozen(spec), f"cnn+{spec.head}")

    def param_count(self) -> int:
        return nets.conv_count(self.spec)


class LstmModel(Model):
    def __init__(self, spec: nets.LstmSpec, rng: Rng):
        self.spec = spec
        name = f"lstm{spec.units}" + ("+gmnm" if spec.gmnm is not None else "")
        super().__init__(nets.lstm_init(spec, rng), lambda P, X: nets.lstm_forward(P, X, spec), nets.lstm_frozen(spec), name)

    def param_count(self) -> int:
        return nets.lstm_count(self.spec)
