import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from gmnm import GMNMRegressor, MLPBaselineRegressor
from gmnm.engine import Rng


def bump_data(n=200, seed=0):
    X = Rng(seed).uniform((n, 2), -1, 1)
    return X, np.exp(-2.0 * np.sum(X ** 2, axis=1))


class TestGmnmRegressor:
    def test_fits_smooth_target(self):
        X, y = bump_data()
        est = GMNMRegressor(n_components=20, max_steps=400, learning_rate=2e-2).fit(X, y)
        assert est.score(X, y) > 0.95
        assert est.loss_curve_[-1] < est.loss_curve_[0]

    def test_predict_shape(self):
        X, y = bump_data(50)
        est = GMNMRegressor(n_components=5, max_steps=2).fit(X, y)
        assert est.predict(X).shape == (50,)
        assert est.n_features_in_ == 2

    def test_multi_output(self):
        X, y = bump_data(40)
        est = GMNMRegressor(n_components=5, max_steps=2).fit(X, np.stack([y, -y], axis=1))
        assert est.predict(X).shape == (40, 2)

    def test_transform_rows_reproduce_prediction(self):
        X, y = bump_data(30)
        est = GMNMRegressor(n_components=6, max_steps=20).fit(X, y)
        F = est.transform(X)
        assert F.shape == (30, 6)
        assert np.all((F > 0) & (F <= 1))
        np.testing.assert_allclose(F @ est.params_.Pi[0], est.predict(X), rtol=1e-12, atol=1e-14)

    @pytest.mark.parametrize("mode", ["ridge", "quadratic"])
    def test_deterministic(self, mode):
        X, y = bump_data(60)
        a = GMNMRegressor(n_components=4, mode=mode, max_steps=15, random_state=3).fit(X, y).predict(X)
        b = GMNMRegressor(n_components=4, mode=mode, max_steps=15, random_state=3).fit(X, y).predict(X)
        np.testing.assert_array_equal(a, b)

    def test_frozen_centres(self):
        X, y = bump_data(60)
        est = GMNMRegressor(n_components=4, trainable_mu=False, max_steps=0).fit(X, y)
        mu0 = est.params_.mu.copy()
        est.set_params(max_steps=10).fit(X, y)
        np.testing.assert_array_equal(est.params_.mu, mu0)

    def test_get_set_params_and_clone(self):
        est = GMNMRegressor(n_components=7, mode="quadratic")
        assert est.get_params()["n_components"] == 7
        twin = clone(est)
        assert twin.get_params() == est.get_params() and twin is not est

    def test_pipeline(self):
        X, y = bump_data(80)
        pipe = make_pipeline(StandardScaler(), GMNMRegressor(n_components=10, max_steps=50)).fit(X, y)
        assert pipe.predict(X).shape == (80,)

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            GMNMRegressor().predict(np.zeros((1, 2)))

    def test_feature_count_checked(self):
        X, y = bump_data(20)
        est = GMNMRegressor(n_components=3, max_steps=1).fit(X, y)
        with pytest.raises(ValueError):
            est.predict(np.zeros((2, 3)))

    @pytest.mark.parametrize("X, y", [(np.array([[np.nan, 0.0]]), np.array([1.0])),
                                      (np.zeros((3, 2)), np.zeros(2))])
    def test_invalid_input(self, X, y):
        with pytest.raises(ValueError):
            GMNMRegressor(max_steps=1).fit(X, y)


class TestMlpBaseline:
    def test_fits_smooth_target(self):
        X, y = bump_data()
        est = MLPBaselineRegressor(hidden_layer_sizes=(16, 16), max_steps=400).fit(X, y)
        assert est.score(X, y) > 0.9

    def test_parameter_count(self):
        X, y = bump_data(10)
        est = MLPBaselineRegressor(max_steps=0).fit(X, y)
        assert est.model_.param_count() == 5301

    def test_clone(self):
        est = MLPBaselineRegressor(hidden_layer_sizes=(4,), activation="relu")
        assert clone(est).get_params()["activation"] == "relu"
