import numpy as np
import pytest

from gmnm.engine import (
    HyperDual,
    NonFiniteError,
    Rng,
    ShapeError,
    Tape,
    UnsupportedPrimitiveError,
    as_tensor,
    backward,
    check_gradients,
    fn,
    hyperdual_d2,
    hyperdual_laplacian,
    matmul,
    numerical_gradient,
    rng_uniform,
    tensor_binop,
)
from gmnm.engine.gradcheck import gradient_error


def naive_matmul(a, b):
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for p in range(k):
                s += a[i, p] * b[p, j]
            out[i, j] = s
    return out


def tape_grad(f, x):
    tape = Tape()
    v = tape.leaf(x, "x")
    return backward(tape, f(v))["x"]


class TestTensorOps:
    def test_add(self):
        np.testing.assert_array_equal(tensor_binop("add", [1.0, 2.0], [3.0, 4.0]), [4.0, 6.0])

    def test_mul_by_scalar_zero(self):
        np.testing.assert_array_equal(tensor_binop("mul", [2.0, 3.0], 0.0), [0.0, 0.0])

    def test_sub_self(self):
        x = Rng(0).normal((3, 4))
        np.testing.assert_array_equal(tensor_binop("sub", x, x), np.zeros((3, 4)))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            tensor_binop("add", np.ones(2), np.ones(3))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_output(self):
        with pytest.raises(NonFiniteError) as err:
            tensor_binop("mul", [np.inf], 0.0)
        assert err.value.op == "mul"

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            tensor_binop("div", 1.0, 2.0)

    def test_as_tensor_is_read_only(self):
        t = as_tensor([1, 2])
        assert t.dtype == np.float64
        with pytest.raises(ValueError):
            t[0] = 5.0


class TestMatmul:
    def test_identity(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(matmul(np.eye(2), a), a)

    def test_dot_product(self):
        np.testing.assert_array_equal(matmul([[1.0, 2.0]], [[3.0], [4.0]]), [[11.0]])

    def test_triple_loop_oracle(self):
        # small integers keep every partial sum exact, so any summation order agrees
        rng = Rng(3)
        a = np.round(rng.uniform((5, 7), -9, 9))
        b = np.round(rng.uniform((7, 4), -9, 9))
        np.testing.assert_array_equal(matmul(a, b), naive_matmul(a, b))

    def test_random_floats_close_to_oracle(self):
        rng = Rng(4)
        a, b = rng.normal((6, 5)), rng.normal((5, 3))
        np.testing.assert_allclose(matmul(a, b), naive_matmul(a, b), rtol=1e-14, atol=1e-15)

    def test_inner_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_rank_check(self):
        with pytest.raises(ShapeError):
            matmul(np.ones(3), np.ones(3))


class TestRng:
    def test_same_seed_bit_identical(self):
        np.testing.assert_array_equal(rng_uniform(Rng(42), (50,), 0, 1), rng_uniform(Rng(42), (50,), 0, 1))

    def test_mean_of_uniform(self):
        x = rng_uniform(Rng(0), (100_000,), 0.0, 1.0)
        assert 0.49 <= x.mean() <= 0.51
        assert x.min() >= 0.0 and x.max() < 1.0

    def test_shape(self):
        assert rng_uniform(Rng(1), (2, 3), -1, 1).size == 6

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            rng_uniform(Rng(1), 3, 1.0, 1.0)

    def test_spawn_is_deterministic_and_distinct(self):
        a, b = Rng(5).spawn(1), Rng(5).spawn(1)
        np.testing.assert_array_equal(a.normal(4), b.normal(4))
        assert not np.array_equal(Rng(5).spawn(1).normal(4), Rng(5).spawn(2).normal(4))


class TestBackward:
    def test_sum(self):
        np.testing.assert_array_equal(tape_grad(lambda w: w.sum(), np.array([1.0, -2.0, 3.0])), [1.0, 1.0, 1.0])

    def test_gaussian_at_max(self):
        g = tape_grad(lambda w: fn.exp(-0.5 * fn.square(w)).sum(), np.zeros(1))
        np.testing.assert_array_equal(g, [0.0])

    def test_non_scalar_root(self):
        tape = Tape()
        v = tape.leaf(np.ones(3), "x")
        with pytest.raises(ShapeError):
            backward(tape, v * 2.0)

    def test_accumulates_over_uses(self):
        # f = x*x + 3x  ->  2x + 3
        x = np.array([0.5, -1.5])
        np.testing.assert_allclose(tape_grad(lambda v: (v * v + 3.0 * v).sum(), x), 2 * x + 3)

    def test_frozen_leaf_gets_no_gradient(self):
        tape = Tape()
        P = tape.leaves_from({"a": np.ones(2), "b": np.ones(2)}, frozen={"b"})
        grads = backward(tape, (P["a"] * P["b"]).sum())
        assert set(grads) == {"a"}

    def test_unreached_leaf_gets_zero(self):
        tape = Tape()
        P = tape.leaves_from({"a": np.ones(2), "b": np.ones((2, 2))})
        grads = backward(tape, P["a"].sum())
        np.testing.assert_array_equal(grads["b"], np.zeros((2, 2)))

    def test_three_layer_composite_vs_fd(self):
        rng = Rng(11)
        params = {"W0": rng.normal((3, 4)), "W1": rng.normal((4, 4)), "W2": rng.normal((4, 1))}
        X = rng.normal((5, 3))

        def objective(P):
            h = fn.tanh(X @ P["W0"])
            h = fn.sigmoid(h @ P["W1"])
            return fn.square(h @ P["W2"]).mean()

        for report in check_gradients(objective, params):
            assert report.max_rel < 1e-5, report.line()

    def test_linearity(self):
        rng = Rng(2)
        x = rng.normal(4)

        def f(v):
            return fn.sin(v).sum()

        def g(v):
            return (fn.square(v) * v).sum()

        lhs = tape_grad(lambda v: 2.5 * f(v) - 0.75 * g(v), x)
        rhs = 2.5 * tape_grad(f, x) - 0.75 * tape_grad(g, x)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-14, atol=1e-14)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nan_surfaces_with_op(self):
        tape = Tape()
        v = tape.leaf(np.array([1000.0]), "x")
        with pytest.raises(NonFiniteError) as err:
            fn.exp(v)
        assert err.value.op == "exp"
        assert err.value.node is not None

    def test_topological_order(self):
        tape = Tape()
        a = tape.leaf(np.ones(2), "a")
        b = fn.exp(a) * a
        root = b.sum()
        for i, node in enumerate(tape.nodes):
            assert all(p < i for p, _ in node.parents)
        assert root.index == len(tape.nodes) - 1


PRIMITIVES = {
    "add": lambda x, c: (x + c).sum(),
    "sub": lambda x, c: (c - x).sum(),
    "mul": lambda x, c: (x * c).sum(),
    "div": lambda x, c: (c / (2.0 + fn.square(x))).sum(),
    "matmul": lambda x, c: (x.reshape(2, 3) @ c.reshape(3, 2)).sum(),
    "sum": lambda x, c: (x.sum() * x.sum()),
    "mean": lambda x, c: fn.square(x).mean(),
    "exp": lambda x, c: (fn.exp(x) * c).sum(),
    "sin": lambda x, c: (fn.sin(x) * c).sum(),
    "cos": lambda x, c: (fn.cos(x) * c).sum(),
    "tanh": lambda x, c: (fn.tanh(x) * c).sum(),
    "square": lambda x, c: (fn.square(x) * c).sum(),
    "sigmoid": lambda x, c: (fn.sigmoid(x) * c).sum(),
    "max": lambda x, c: (x * c).reshape(2, 3).max(axis=-1).sum(),
    "reshape": lambda x, c: (x.reshape(3, 2) * c.reshape(3, 2)).sum(),
    "transpose": lambda x, c: (x.reshape(2, 3).T * c.reshape(3, 2)).sum(),
    "getitem": lambda x, c: (x[1:4] * c[:3]).sum() + x[np.array([0, 0, 5])].sum(),
}


class TestPrimitiveGradients:
    @pytest.mark.parametrize("name", sorted(PRIMITIVES))
    def test_twenty_random_points(self, name):
        f = PRIMITIVES[name]
        rng = Rng(100)
        for _ in range(20):
            x, c = rng.normal(6), rng.normal(6)
            analytic = tape_grad(lambda v: f(v, c), x)
            numeric = numerical_gradient(lambda v: float(f(v, c)), x)
            rel, tiny = gradient_error(analytic, numeric)
            assert rel < 1e-5 and tiny < 1e-8, (name, rel, tiny)

    def test_relu_away_from_kink(self):
        x = np.array([-1.0, -0.3, 0.4, 2.0])
        np.testing.assert_array_equal(tape_grad(lambda v: fn.relu(v).sum(), x), [0, 0, 1, 1])

    def test_broadcast_adjoint_is_summed(self):
        x = np.ones((3, 2))
        tape = Tape()
        P = tape.leaves_from({"x": x, "b": np.zeros(2)})
        grads = backward(tape, (P["x"] + P["b"]).sum())
        np.testing.assert_array_equal(grads["b"], [3.0, 3.0])


class TestHyperDual:
    def test_sine(self):
        v, d1, d2 = hyperdual_d2(lambda x: fn.sin(np.pi * x[0]), [0.5], 0)
        assert v == pytest.approx(1.0, abs=1e-15)
        assert d1 == pytest.approx(0.0, abs=1e-15)
        assert d2 == pytest.approx(-np.pi ** 2, rel=1e-15)

    def test_bilinear(self):
        for k in range(2):
            assert hyperdual_d2(lambda x: x[0] * x[1], [0.3, -1.7], k)[2] == 0.0

    def test_product_rule(self):
        u = HyperDual(2.0, 0.5, -1.0)
        v = HyperDual(-3.0, 1.5, 4.0)
        w = u * v
        assert w.d2 == u.d2 * v.value + 2 * u.d1 * v.d1 + u.value * v.d2

    def test_quotient_and_power(self):
        # f = x^3 / (1 + x^2); compare to second-order central differences
        def f(x):
            return x[0] ** 3 / (1.0 + x[0] * x[0])

        x0, h = 0.8, 1e-4
        g = lambda t: t ** 3 / (1 + t * t)
        fd2 = (g(x0 + h) - 2 * g(x0) + g(x0 - h)) / h ** 2
        assert hyperdual_d2(f, [x0], 0)[2] == pytest.approx(fd2, rel=1e-4)

    def test_laplacian(self):
        f = lambda x: fn.exp(x[0]) * fn.cos(x[1]) + fn.square(x[2])
        x = np.array([0.3, -0.4, 1.1])
        expected = np.exp(0.3) * np.cos(-0.4) - np.exp(0.3) * np.cos(-0.4) + 2.0
        assert hyperdual_laplacian(f, x) == pytest.approx(expected, rel=1e-14)

    def test_unsupported_primitive(self):
        with pytest.raises(UnsupportedPrimitiveError):
            hyperdual_d2(lambda x: np.log(x[0]), [1.0], 0)

    def test_direction_out_of_range(self):
        with pytest.raises(IndexError):
            hyperdual_d2(lambda x: x[0], [1.0], 3)

    def test_tape_components_are_differentiable(self):
        # d/dw of d2/dx2 [tanh(w x)] at x0 equals FD of the analytic second derivative
        x0 = 0.4

        def d2(w):
            t = np.tanh(w * x0)
            return -2.0 * w * w * t * (1 - t * t)

        tape = Tape()
        w = tape.leaf(np.array([0.9]), "w")
        out = fn.tanh(w * HyperDual(np.array([x0]), np.ones(1), np.zeros(1)))
        g = backward(tape, out.d2.sum())["w"]
        numeric = (d2(0.9 + 1e-6) - d2(0.9 - 1e-6)) / 2e-6
        np.testing.assert_allclose(g, [numeric], rtol=1e-7)
