"""Numeric primitives: RNG construction, array validation, activations."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kanbench.numcore import (
    ACTIVATIONS,
    apply_activation,
    as_matrix,
    make_rng,
    matmul,
    sigmoid,
    silu,
    silu_grad,
)

finite_floats = st.floats(min_value=-50, max_value=50, allow_nan=False)


class TestMakeRng:
    def test_same_seed_same_stream(self):
        a = make_rng(123).standard_normal(16)
        b = make_rng(123).standard_normal(16)
        assert np.array_equal(a, b)

    def test_different_seeds_differ(self):
        a = make_rng(1).standard_normal(16)
        b = make_rng(2).standard_normal(16)
        assert not np.array_equal(a, b)

    def test_is_pcg64_generator(self):
        rng = make_rng(0)
        assert isinstance(rng, np.random.Generator)
        assert type(rng.bit_generator).__name__ == "PCG64"


class TestAsMatrix:
    def test_accepts_2d(self):
        m = as_matrix([[1.0, 2.0], [3.0, 4.0]])
        assert m.shape == (2, 2) and m.dtype == np.float64

    def test_rejects_1d(self):
        with pytest.raises(ValueError):
            as_matrix([1.0, 2.0])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            as_matrix(np.empty((0, 3)))


class TestMatmul:
    def test_matches_numpy(self):
        rng = make_rng(0)
        a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 5))
        assert np.allclose(matmul(a, b), a @ b)

    def test_shape_mismatch_names_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 3\)"):
            matmul(np.ones((2, 3)), np.ones((2, 3)))


class TestSigmoid:
    def test_known_values(self):
        assert sigmoid(np.array([0.0]))[0] == pytest.approx(0.5, abs=1e-15)
        assert sigmoid(np.array([np.log(3.0)]))[0] == pytest.approx(0.75, rel=1e-12)

    def test_extreme_inputs_do_not_overflow(self):
        out = sigmoid(np.array([-1000.0, -50.0, 50.0, 1000.0]))
        assert np.all(np.isfinite(out))
        assert out[0] == 0.0 and out[-1] == 1.0

    @given(st.lists(finite_floats, min_size=1, max_size=20))
    def test_symmetry(self, xs):
        x = np.array(xs)
        assert np.allclose(sigmoid(x) + sigmoid(-x), 1.0, atol=1e-12)


class TestSilu:
    def test_matches_definition(self):
        x = np.linspace(-5, 5, 41)
        assert np.allclose(silu(x), x * sigmoid(x), atol=1e-15)

    @given(st.lists(st.floats(min_value=-20, max_value=20), min_size=1, max_size=10))
    def test_grad_matches_finite_difference(self, xs):
        x = np.array(xs)
        h = 1e-6
        num = (silu(x + h) - silu(x - h)) / (2 * h)
        assert np.allclose(silu_grad(x), num, atol=1e-7)


class TestApplyActivation:
    def test_all_kinds_present(self):
        assert set(ACTIVATIONS) == {"sigmoid", "tanh", "silu", "linear"}

    def test_linear_is_identity(self):
        m = np.array([[1.5, -2.0]])
        assert np.array_equal(apply_activation(m, "linear"), m)

    def test_tanh(self):
        m = np.array([[0.5]])
        assert apply_activation(m, "tanh")[0, 0] == pytest.approx(np.tanh(0.5))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="spam"):
            apply_activation(np.ones((1, 1)), "spam")
