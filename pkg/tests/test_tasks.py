import gzip

import numpy as np
import pytest

from gmnm.engine import Rng
from gmnm.tasks import fit2d, mnist, poisson, timeseries
from gmnm.tasks.dataset import Dataset, load_csv, save_csv


class TestFit2d:
    def test_base_level_peak(self):
        assert fit2d.target_2d([0.5, 0.5], fit2d.FitLevel()) == pytest.approx(1.0, abs=1e-15)

    def test_sinh_term(self):
        # 1 - 5 * 2 * sinh(0.5)
        assert fit2d.target_2d([0.5, 0.5], fit2d.FitLevel(5, 0, 0)) == pytest.approx(-4.210953, abs=1e-6)

    def test_plateau_inside_and_outside(self):
        lvl = fit2d.FitLevel(0, 0.1, 0)
        assert fit2d.target_2d([-3.0, 2.5], lvl) == pytest.approx(0.1 / 1.5, abs=1e-12)
        assert fit2d.target_2d([-1.0, 2.5], lvl) == pytest.approx(0.0, abs=1e-12)

    def test_plateau_edges_included(self):
        np.testing.assert_array_equal(fit2d.plateau(np.array([-3.5, -2.0]), np.array([2.0, 3.0])), [1 / 1.5] * 2)

    def test_standard_normal_densities(self):
        assert fit2d.gaussian_density([0.0], [0.0], [[1.0]]) == pytest.approx(1 / np.sqrt(2 * np.pi), rel=1e-14)
        assert fit2d.gaussian_density([0.0, 0.0], [0.0, 0.0], np.eye(2)) == pytest.approx(1 / (2 * np.pi), rel=1e-14)

    def test_printed_covariance_peak(self):
        # det = 0.6 * 3.9 - 2.0 * 1.1 = 0.14
        peak = fit2d.gaussian_density([0.0, 0.0], fit2d.BUMP_MEAN, fit2d.PRINTED_SIGMA)
        assert peak == pytest.approx(1 / (2 * np.pi * np.sqrt(0.14)), rel=1e-12)

    def test_density_matches_symmetrised_exponent(self):
        x = Rng(0).normal((20, 2))
        S = fit2d.PRINTED_SIGMA
        sym_inv = 0.5 * (np.linalg.inv(S) + np.linalg.inv(S).T)
        ref = np.exp(-0.5 * np.einsum("ni,ij,nj->n", x, sym_inv, x)) / (2 * np.pi * np.sqrt(np.linalg.det(S)))
        np.testing.assert_allclose(fit2d.gaussian_density(x, [0, 0], S), ref, rtol=1e-13)

    def test_singular_covariance_rejected(self):
        with pytest.raises(np.linalg.LinAlgError):
            fit2d.gaussian_density([0.0, 0.0], [0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]])

    def test_batch_matches_pointwise(self):
        X = Rng(1).uniform((30, 2), -4, 4)
        lvl = fit2d.LEVELS[-1]
        np.testing.assert_array_equal(fit2d.target_2d(X, lvl), [fit2d.target_2d(x, lvl) for x in X])

    def test_dataset_shape_and_domain(self):
        data = fit2d.sample_fit_dataset(fit2d.LEVELS[0], 50, 10, seed=3)
        assert data.train_inputs.shape == (50, 2) and data.test_targets.shape == (10, 1)
        assert np.all(np.abs(data.inputs) <= 4.0)

    def test_dataset_deterministic(self):
        a = fit2d.sample_fit_dataset(fit2d.LEVELS[1], 20, 5, seed=9)
        b = fit2d.sample_fit_dataset(fit2d.LEVELS[1], 20, 5, seed=9)
        np.testing.assert_array_equal(a.inputs, b.inputs)

    def test_nonpositive_counts(self):
        with pytest.raises(ValueError):
            fit2d.sample_fit_dataset(fit2d.LEVELS[0], 0, 5)


class TestPoisson:
    def test_exact_solution_losses(self):
        b, r = poisson.pde_losses(poisson.ExactSolution(), poisson.PdeConfig(), Rng(0))
        assert b < 1e-30
        assert r < 1e-20

    def test_zero_model_residual(self):
        # E[(2 pi^2 sin sin)^2] over the square is pi^4
        _, r = poisson.pde_losses(poisson.ZeroModel(), poisson.PdeConfig(n_interior=200000), Rng(1))
        assert r == pytest.approx(np.pi ** 4, rel=0.01)

    def test_zero_model_l2(self):
        assert poisson.l2_error(poisson.ZeroModel(), 101) == pytest.approx(0.5, abs=1e-3)

    def test_exact_model_l2(self):
        assert poisson.l2_error(poisson.ExactSolution(), 101) == 0.0

    def test_single_cell_grid(self):
        np.testing.assert_array_equal(poisson.eval_grid(1), [[0.0, 0.0]])
        assert poisson.l2_error(poisson.ZeroModel(), 1) == 0.0

    def test_grid_is_uniform(self):
        g = poisson.eval_grid(4)
        assert g.shape == (16, 2)
        np.testing.assert_allclose(np.unique(g[:, 0]), [-0.75, -0.25, 0.25, 0.75], rtol=0, atol=1e-15)

    def test_boundary_points_on_edges(self):
        pts = poisson.sample_boundary(101, Rng(2))
        on_edge = np.isclose(np.abs(pts), 1.0).any(axis=1)
        assert on_edge.all()
        assert np.all(np.abs(pts) <= 1.0)

    def test_source_is_laplacian_of_solution(self):
        x = Rng(3).uniform((10, 2), -1, 1)
        h = 1e-4
        f = poisson.exact_solution
        fd = sum((f(x + h * e) - 2 * f(x) + f(x - h * e)) / h ** 2 for e in np.eye(2))
        np.testing.assert_allclose(poisson.source(x), fd, rtol=1e-5, atol=1e-5)

    @pytest.mark.parametrize("kw", [{"n_interior": 0}, {"n_boundary": 0}, {"boundary_weight": 0.0}])
    def test_invalid_config(self, kw):
        with pytest.raises(ValueError):
            poisson.PdeConfig(**kw)


class TestTimeseries:
    def test_constant_signals(self):
        cfg = timeseries.TsConfig(a=(0, 0, 0, 0), b=(1, 2, 3, 4), n_samples=20)
        data = timeseries.ts_generate(cfg)
        # 3*4 - 3*1 + 4*3 - 2*1
        np.testing.assert_array_equal(data.targets, np.full((20, 1), 19.0))
        np.testing.assert_array_equal(data.inputs[0, 0], [1.0, 2.0, 3.0, 4.0])

    def test_target_direct_formula(self):
        cfg = timeseries.TsConfig()
        t = 7.3
        a, b = np.array(cfg.a), np.array(cfg.b)
        x = lambda i, s: a[i - 1] * np.sin(s) + b[i - 1]
        ref = x(3, t) * x(4, t - 0.1) - x(3, t - 0.5) * x(1, t - 0.1) + x(4, t) * x(3, t) - x(2, t - 0.5) * x(1, t - 0.2)
        assert timeseries.target(t, cfg) == pytest.approx(ref, rel=1e-14)

    def test_window_ends_at_t(self):
        cfg = timeseries.TsConfig(n_samples=50)
        data = timeseries.ts_generate(cfg)
        t = timeseries.sample_times(cfg)
        assert data.inputs.shape == (50, 10, 4)
        np.testing.assert_allclose(data.inputs[:, -1, :], timeseries.signals(t, cfg), rtol=0, atol=1e-15)
        np.testing.assert_allclose(data.inputs[:, 0, :], timeseries.signals(t - 0.9, cfg), rtol=0, atol=1e-15)

    def test_target_is_function_of_window(self):
        # every delayed term is some window row
        cfg = timeseries.TsConfig(n_samples=40)
        data = timeseries.ts_generate(cfg)
        w = data.inputs
        x = lambda i, k: w[:, -1 - k, i - 1]
        y = x(3, 0) * x(4, 1) - x(3, 5) * x(1, 1) + x(4, 0) * x(3, 0) - x(2, 5) * x(1, 2)
        np.testing.assert_allclose(data.targets[:, 0], y, rtol=1e-13, atol=1e-13)

    def test_chronological_split(self):
        data = timeseries.ts_generate(timeseries.TsConfig(n_samples=100))
        np.testing.assert_array_equal(data.train_idx, np.arange(80))
        np.testing.assert_array_equal(data.test_idx, np.arange(80, 100))

    @pytest.mark.parametrize("kw", [{"dt": 0.3}, {"window": 5}])
    def test_delay_not_on_window(self, kw):
        with pytest.raises(ValueError):
            timeseries.ts_generate(timeseries.TsConfig(**kw))

    @pytest.mark.parametrize("kw", [{"a": (1, 2, 3)}, {"split": 1.0}, {"n_samples": 1}, {"dt": 0.0}])
    def test_invalid_config(self, kw):
        with pytest.raises(ValueError):
            timeseries.TsConfig(**kw)


def write_mnist(folder, n_train=5, n_test=3, gz=False):
    rng = np.random.default_rng(0)
    folder.mkdir(parents=True, exist_ok=True)
    arrays = {
        "train-images-idx3-ubyte": rng.integers(0, 256, (n_train, 28, 28)),
        "train-labels-idx1-ubyte": rng.integers(0, 10, n_train),
        "t10k-images-idx3-ubyte": rng.integers(0, 256, (n_test, 28, 28)),
        "t10k-labels-idx1-ubyte": rng.integers(0, 10, n_test),
    }
    for name, arr in arrays.items():
        path = folder / name
        mnist.write_idx(path, arr)
        if gz:
            path.with_name(name + ".gz").write_bytes(gzip.compress(path.read_bytes()))
            path.unlink()
    return arrays


class TestMnist:
    def test_round_trip_and_scaling(self, tmp_path):
        arrays = write_mnist(tmp_path)
        data = mnist.mnist_load(tmp_path / "train-images-idx3-ubyte", tmp_path / "train-labels-idx1-ubyte")
        assert data.inputs.shape == (5, 28, 28, 1)
        np.testing.assert_array_equal(data.inputs[..., 0] * 255.0, arrays["train-images-idx3-ubyte"])
        np.testing.assert_array_equal(data.targets, arrays["train-labels-idx1-ubyte"])
        assert data.inputs.min() >= 0.0 and data.inputs.max() <= 1.0

    def test_extreme_pixels(self, tmp_path):
        mnist.write_idx(tmp_path / "img", np.array([[[0, 255]]]))
        np.testing.assert_array_equal(mnist.read_images(tmp_path / "img"), [[[0, 255]]])

    def test_split_with_limit_and_gzip(self, tmp_path):
        write_mnist(tmp_path / "mnist", n_train=6, n_test=4, gz=True)
        data = mnist.mnist_split(tmp_path, train_limit=4)
        assert len(data.train_idx) == 4 and len(data.test_idx) == 4

    def test_env_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GMNM_DATA_DIR", str(tmp_path))
        assert mnist.data_root() == tmp_path
        assert mnist.data_root("elsewhere").name == "elsewhere"

    def test_missing_files(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            mnist.mnist_split(tmp_path)

    def test_bad_magic(self, tmp_path):
        mnist.write_idx(tmp_path / "labels", np.arange(20))
        with pytest.raises(mnist.IdxFormatError, match="magic"):
            mnist.read_images(tmp_path / "labels")

    def test_truncated_payload(self, tmp_path):
        mnist.write_idx(tmp_path / "img", np.zeros((2, 3, 3)))
        raw = (tmp_path / "img").read_bytes()
        (tmp_path / "img").write_bytes(raw[:-1])
        with pytest.raises(mnist.IdxFormatError, match="truncated"):
            mnist.read_images(tmp_path / "img")

    def test_short_header(self):
        with pytest.raises(mnist.IdxFormatError):
            mnist.parse_idx(b"\x00\x00", mnist.IMAGES_MAGIC, 3)

    def test_count_mismatch(self, tmp_path):
        mnist.write_idx(tmp_path / "img", np.zeros((2, 28, 28)))
        mnist.write_idx(tmp_path / "lab", np.zeros(3))
        with pytest.raises(mnist.IdxFormatError):
            mnist.mnist_load(tmp_path / "img", tmp_path / "lab")


class TestDataset:
    def test_csv_round_trip(self, tmp_path):
        rng = Rng(0)
        data = Dataset(rng.normal((6, 3, 2)), rng.normal((6, 1)), np.array([0, 2, 3, 5]), np.array([1, 4]))
        save_csv(data, tmp_path / "d.csv")
        back = load_csv(tmp_path / "d.csv", input_shape=(3, 2))
        np.testing.assert_array_equal(back.inputs, data.inputs)
        np.testing.assert_array_equal(back.targets, data.targets)
        np.testing.assert_array_equal(back.test_idx, [1, 4])

    def test_overlapping_split(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((3, 1)), np.zeros((3, 1)), np.array([0, 1]), np.array([1, 2]))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((3, 1)), np.zeros((2, 1)), np.arange(3), np.arange(0))
