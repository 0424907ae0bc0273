import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from recsuite import numeric


finite_floats = st.floats(min_value=-50, max_value=50, allow_nan=False)


class TestSoftmax:
    def test_symmetry(self):
        np.testing.assert_allclose(numeric.softmax([0.0, 0.0]), [0.5, 0.5])

    def test_singleton(self):
        np.testing.assert_allclose(numeric.softmax([7.3]), [1.0])

    def test_three_values_against_direct_oracle(self):
        # independent oracle: plain exp/sum, no max subtraction
        xs = [1.0, 2.0, 3.0]
        es = [math.exp(v) for v in xs]
        z = sum(es)
        expected = [e / z for e in es]
        got = numeric.softmax(xs)
        np.testing.assert_allclose(got, expected, atol=1e-5)
        np.testing.assert_allclose(got, [0.090031, 0.244728, 0.665241], atol=1e-5)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            numeric.softmax([])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            numeric.softmax([1.0, float("nan")])
        with pytest.raises(ValueError):
            numeric.softmax([1.0, float("inf")])

    def test_large_inputs_stable(self):
        out = numeric.softmax([1000.0, 1000.0])
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, [0.5, 0.5])

    @given(st.lists(finite_floats, min_size=1, max_size=8))
    def test_sums_to_one(self, xs):
        out = numeric.softmax(xs)
        assert abs(out.sum() - 1.0) <= 1e-9
        assert np.all(out >= 0)

    @given(st.lists(finite_floats, min_size=1, max_size=8), finite_floats)
    def test_shift_invariance(self, xs, c):
        a = numeric.softmax(xs)
        b = numeric.softmax([x + c for x in xs])
        np.testing.assert_allclose(a, b, atol=1e-9)


class TestSigmoid:
    def test_center(self):
        assert numeric.sigmoid(0.0) == 0.5

    def test_saturation(self):
        assert abs(numeric.sigmoid(50.0) - 1.0) <= 1e-9

    def test_one_against_oracle(self):
        expected = 1.0 / (1.0 + math.exp(-1.0))
        assert abs(numeric.sigmoid(1.0) - expected) < 1e-12
        assert abs(numeric.sigmoid(1.0) - 0.731059) < 1e-5

    def test_extreme_negative_no_overflow(self):
        assert numeric.sigmoid(-745.0) >= 0.0

    @given(finite_floats, finite_floats)
    def test_monotone(self, a, b):
        lo, hi = min(a, b), max(a, b)
        assert numeric.sigmoid(lo) <= numeric.sigmoid(hi)

    def test_vectorized(self):
        out = numeric.sigmoid(np.array([0.0, 1.0]))
        np.testing.assert_allclose(out, [0.5, 1.0 / (1.0 + math.exp(-1.0))])


class TestDenseForward:
    def test_zero_weights_relu(self):
        W = np.zeros((2, 3))
        b = np.array([1.0, -1.0])
        x = np.array([5.0, 6.0, 7.0])
        np.testing.assert_allclose(numeric.dense_forward(W, b, x, "relu"), [1.0, 0.0])

    def test_identity(self):
        W = np.eye(2)
        b = np.zeros(2)
        x = np.array([2.0, 3.0])
        np.testing.assert_allclose(
            numeric.dense_forward(W, b, x, "identity"), [2.0, 3.0]
        )

    def test_tanh_against_scalar_oracle(self):
        W = np.array([[1.0, 1.0]])
        b = np.array([0.0])
        x = np.array([0.5, 0.5])
        expected = math.tanh(1.0)
        got = numeric.dense_forward(W, b, x, "tanh")
        np.testing.assert_allclose(got, [expected], atol=1e-5)
        np.testing.assert_allclose(got, [0.761594], atol=1e-5)

    def test_sigmoid_activation(self):
        W = np.zeros((1, 1))
        out = numeric.dense_forward(W, np.array([0.0]), np.array([3.0]), "sigmoid")
        np.testing.assert_allclose(out, [0.5])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            numeric.dense_forward(np.zeros((2, 3)), np.zeros(2), np.zeros(4))
        with pytest.raises(ValueError):
            numeric.dense_forward(np.zeros((2, 3)), np.zeros(5), np.zeros(3))

    def test_unknown_activation(self):
        with pytest.raises(ValueError):
            numeric.dense_forward(np.eye(2), np.zeros(2), np.zeros(2), "softplus")


class TestSgdStep:
    def test_zero_gradient_fixed_point(self):
        p = np.array([1.0])
        out = numeric.sgd_step(p, np.array([0.0]), lr=0.1, l2=0.0)
        np.testing.assert_allclose(out, [1.0])

    def test_forced_arithmetic(self):
        out = numeric.sgd_step(np.array([1.0]), np.array([1.0]), lr=0.1, l2=0.0)
        np.testing.assert_allclose(out, [0.9])

    def test_weight_decay_oracle(self):
        # 2 - 0.1 * (0 + 2*0.5*2) = 1.8
        out = numeric.sgd_step(np.array([2.0]), np.array([0.0]), lr=0.1, l2=0.5)
        np.testing.assert_allclose(out, [1.8])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            numeric.sgd_step(np.zeros(2), np.zeros(3), lr=0.1, l2=0.0)


class TestGradCheck:
    def test_quadratic_exact(self):
        def fn(p):
            return 0.5 * float(np.sum(p * p)), p.copy()

        params = np.array([0.3, -1.2, 2.0])
        assert numeric.grad_check(fn, params) < 1e-6

    def test_sigmoid_sum(self):
        def fn(p):
            s = numeric.sigmoid(p)
            return float(np.sum(s)), s * (1.0 - s)

        params = np.array([[0.1, -0.4], [1.3, 0.0]])
        assert numeric.grad_check(fn, params) < 1e-4

    def test_detects_doubled_gradient(self):
        def fn(p):
            return 0.5 * float(np.sum(p * p)), 2.0 * p

        params = np.array([1.0, 2.0])
        err = numeric.grad_check(fn, params)
        # |2g - g| / (|2g| + |g|) = 1/3
        assert abs(err - 1.0 / 3.0) < 1e-3

    def test_non_finite_loss_rejected(self):
        def fn(p):
            return float("nan"), p

        with pytest.raises(FloatingPointError):
            numeric.grad_check(fn, np.array([1.0]))


class TestInits:
    def test_normal_degenerate_std(self):
        rng = numeric.make_rng(0)
        out = numeric.init_normal(3, 4, mean=0.7, std=0.0, rng=rng)
        assert out.shape == (3, 4)
        np.testing.assert_allclose(out, 0.7)

    def test_normal_deterministic(self):
        a = numeric.init_normal(5, 5, 0.0, 0.01, numeric.make_rng(42))
        b = numeric.init_normal(5, 5, 0.0, 0.01, numeric.make_rng(42))
        assert np.array_equal(a, b)

    def test_normal_sample_mean_clt_bound(self):
        out = numeric.init_normal(100, 100, 0.0, 0.01, numeric.make_rng(7))
        assert -0.001 <= out.mean() <= 0.001

    def test_uniform_attention_bounds_k3(self):
        out = numeric.init_uniform_attention(10, 10, k=3, rng=numeric.make_rng(1))
        assert np.all(out >= -1.0) and np.all(out <= 1.0)

    def test_uniform_attention_bounds_k300(self):
        out = numeric.init_uniform_attention(20, 20, k=300, rng=numeric.make_rng(2))
        assert np.all(out >= -0.1) and np.all(out <= 0.1)

    def test_uniform_attention_deterministic(self):
        a = numeric.init_uniform_attention(4, 6, 8, numeric.make_rng(9))
        b = numeric.init_uniform_attention(4, 6, 8, numeric.make_rng(9))
        assert np.array_equal(a, b)


class TestSoftmaxBackward:
    def test_matches_finite_differences(self):
        rng = numeric.make_rng(3)
        logits = rng.normal(size=5)
        v = rng.normal(size=5)

        def fn(z):
            a = numeric.softmax(z)
            alpha = numeric.softmax(z)
            return float(alpha @ v), numeric.softmax_backward(a, v)

        assert numeric.grad_check(fn, logits) < 1e-6
