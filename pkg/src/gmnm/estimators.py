"""scikit-learn compatible regressors wrapping the GMNM and an MLP baseline.

Both train full-batch (or minibatch when ``batch_size`` is set) with Adam on
the squared error and support ``get_params``/``set_params``, cloning and
pipelines.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import nets
from .engine import Rng
from .mixture import GmnmConfig, GmnmParams, agp_activations
from .models import GmnmModel, MlpModel
from .optim import AdamState, TrainBudget, train
from .tasks.dataset import Dataset


def _fit_dataset(X, y):
    n = len(X)
    return Dataset(X, y, np.arange(n), np.arange(0))


def _fit_model(est, model, X, Y):
    budget = TrainBudget(steps=est.max_steps, batch_size=est.batch_size,
                         eval_every=max(1, est.max_steps), seed=est.random_state or 0)
    data = _fit_dataset(X, Y)
    rec = train(model, data, "mse", AdamState(lr=est.learning_rate), budget,
                evaluate=lambda m: {"train_loss": float(np.mean((m.predict(X) - Y) ** 2))})
    est.model_ = model
    est.loss_curve_ = rec.series("train_loss")
    est.n_features_in_ = X.shape[1]
    est._single_output = Y.shape[1] == 1


def _predict(est, X):
    check_is_fitted(est, "model_")
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != est.n_features_in_:
        raise ValueError(f"X has {X.shape[1]} features, estimator was fitted with {est.n_features_in_}")
    out = est.model_.predict(X)
    return out[:, 0] if est._single_output else out


def _as_2d_target(y):
    y = np.asarray(y, dtype=np.float64)
    return y.reshape(-1, 1) if y.ndim == 1 else y


class GMNMRegressor(RegressorMixin, BaseEstimator):
    """Gaussian mixture-inspired module regressor.

    Parameters
    ----------
    n_components : number of augmented Gaussian projections (m).
    n_projections : projections per component (n); ``None`` means the input
        dimension, or 1 with ``minimal_ridge``.
    mode : ``"ridge"`` or ``"quadratic"``.
    minimal_ridge : train only centres, one direction and the mixing weights.
    trainable_mu : when False the centres stay at their initial draw.
    domain : ``None`` to take the per-feature range of the training inputs.
    """

    def __init__(self, n_components=100, n_projections=None, mode="ridge", minimal_ridge=False,
                 trainable_mu=True, domain=None, learning_rate=1e-2, max_steps=1000,
                 batch_size=None, random_state=0):
        self.n_components = n_components
        self.n_projections = n_projections
        self.mode = mode
        self.minimal_ridge = minimal_ridge
        self.trainable_mu = trainable_mu
        self.domain = domain
        self.learning_rate = learning_rate
        self.max_steps = max_steps
        self.batch_size = batch_size
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, multi_output=True, y_numeric=True)
        Y = _as_2d_target(y)
        domain = self.domain
        if domain is None:
            domain = np.stack([X.min(axis=0), X.max(axis=0)], axis=1).tolist()
        cfg = GmnmConfig(d=X.shape[1], m=self.n_components, n=self.n_projections, out_dim=Y.shape[1],
                         mode=self.mode, trainable_mu=self.trainable_mu, domain=domain,
                         minimal_ridge=self.minimal_ridge)
        _fit_model(self, GmnmModel(cfg, Rng(self.random_state or 0)), X, Y)
        return self

    def predict(self, X):
        return _predict(self, X)

    def transform(self, X):
        """Component activations ``f_i(x)`` as an [N x n_components] feature matrix."""
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, estimator was fitted with {self.n_features_in_}")
        return np.asarray(agp_activations(self.model_.params, X, self.mode)).T

    @property
    def params_(self) -> GmnmParams:
        check_is_fitted(self, "model_")
        return self.model_.gmnm_params()


class MLPBaselineRegressor(RegressorMixin, BaseEstimator):
    """Fully connected network trained with the same loop as the GMNM."""

    def __init__(self, hidden_layer_sizes=(50, 50, 50), activation="tanh", learning_rate=1e-2,
                 max_steps=1000, batch_size=None, random_state=0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.learning_rate = learning_rate
        self.max_steps = max_steps
        self.batch_size = batch_size
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, multi_output=True, y_numeric=True)
        Y = _as_2d_target(y)
        widths = [X.shape[1], *self.hidden_layer_sizes, Y.shape[1]]
        spec = nets.MlpSpec(widths, self.activation)
        _fit_model(self, MlpModel(spec, Rng(self.random_state or 0)), X, Y)
        return self

    def predict(self, X):
        return _predict(self, X)
