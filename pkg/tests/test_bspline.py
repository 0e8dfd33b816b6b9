"""B-spline basis: oracle checks against a naive recursive evaluator,
partition of unity, local support, boundary clamping, and derivatives."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kanbench.bspline import (
    SplineFunction,
    SplineSpec,
    basis_eval,
    basis_grad,
    basis_grad_matrix,
    basis_matrix,
    spline_eval,
    spline_eval_many,
    spline_grad,
)
from kanbench.numcore import make_rng


def naive_basis(knots, j, k, x):
    """Textbook recursive Cox-de Boor, half-open intervals. Independent oracle."""
    if k == 0:
        return 1.0 if knots[j] <= x < knots[j + 1] else 0.0
    left = 0.0
    if knots[j + k] != knots[j]:
        left = (x - knots[j]) / (knots[j + k] - knots[j]) * naive_basis(knots, j, k - 1, x)
    right = 0.0
    if knots[j + k + 1] != knots[j + 1]:
        right = (
            (knots[j + k + 1] - x)
            / (knots[j + k + 1] - knots[j + 1])
            * naive_basis(knots, j + 1, k - 1, x)
        )
    return left + right


class TestSplineSpec:
    def test_knot_layout(self):
        spec = SplineSpec(grid_size=4, degree=2)
        t = spec.knots()
        assert t.shape == (4 + 2 * 2 + 1,)
        assert np.allclose(np.diff(t), spec.step)
        assert t[spec.degree] == pytest.approx(0.0)
        assert t[spec.degree + spec.grid_size] == pytest.approx(1.0)

    def test_n_basis(self):
        assert SplineSpec(5, 3).n_basis == 8
        assert SplineSpec(1, 1).n_basis == 2

    def test_custom_domain(self):
        spec = SplineSpec(2, 1, domain_lo=-1.0, domain_hi=3.0)
        t = spec.knots()
        assert t[1] == pytest.approx(-1.0) and t[3] == pytest.approx(3.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"grid_size": 0, "degree": 2},
            {"grid_size": 3, "degree": -1},
            {"grid_size": 3, "degree": 2, "domain_lo": 1.0, "domain_hi": 0.0},
        ],
    )
    def test_invalid_specs_rejected(self, kwargs):
        with pytest.raises(ValueError):
            SplineSpec(**kwargs)


class TestBasisAgainstNaiveOracle:
    @pytest.mark.parametrize("grid_size,degree", [(1, 1), (3, 2), (5, 3), (8, 4), (10, 5)])
    def test_matches_recursive_reference(self, grid_size, degree):
        spec = SplineSpec(grid_size, degree)
        knots = spec.knots()
        rng = make_rng(grid_size * 100 + degree)
        # strictly interior points (the right endpoint uses a snap convention
        # the half-open naive oracle does not share)
        x = rng.uniform(0.0, 1.0 - 1e-9, size=40)
        ours = basis_matrix(spec, x)
        for row, xi in enumerate(x):
            for j in range(spec.n_basis):
                assert ours[row, j] == pytest.approx(
                    naive_basis(knots, j, degree, xi), abs=1e-12
                )

    def test_degree_must_be_positive(self):
        with pytest.raises(ValueError):
            SplineSpec(4, 0)

    def test_degree_one_hat_hand_values(self):
        # G=2, k=1 on [0,1]: knots (-0.5, 0, 0.5, 1, 1.5), three hat functions
        spec = SplineSpec(2, 1)
        assert np.allclose(basis_eval(spec, 0.25), [0.5, 0.5, 0.0], atol=1e-15)
        assert np.allclose(basis_eval(spec, 0.0), [1.0, 0.0, 0.0], atol=1e-15)


class TestBasisProperties:
    @settings(deadline=None, max_examples=30)
    @given(
        st.integers(min_value=1, max_value=10),
        st.integers(min_value=1, max_value=5),
        st.floats(min_value=0.0, max_value=1.0),
    )
    def test_partition_of_unity(self, grid_size, degree, x):
        total = basis_eval(SplineSpec(grid_size, degree), x).sum()
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_nonnegative_and_local_support(self):
        spec = SplineSpec(6, 3)
        knots = spec.knots()
        x = np.linspace(0, 1, 101)
        b = basis_matrix(spec, x)
        assert np.all(b >= -1e-15)
        for j in range(spec.n_basis):
            lo, hi = knots[j], knots[j + spec.degree + 1]
            outside = (x < lo - 1e-12) | (x > hi + 1e-12)
            assert np.all(np.abs(b[outside, j]) < 1e-12)

    def test_out_of_domain_clamps_to_boundary(self):
        spec = SplineSpec(4, 3)
        lo_val = basis_eval(spec, 0.0)
        hi_val = basis_eval(spec, 1.0)
        assert np.allclose(basis_eval(spec, -7.5), lo_val, atol=1e-15)
        assert np.allclose(basis_eval(spec, 9.0), hi_val, atol=1e-15)
        assert hi_val.sum() == pytest.approx(1.0, abs=1e-12)

    def test_right_endpoint_continuous_from_left(self):
        spec = SplineSpec(5, 2)
        eps = 1e-10
        assert np.allclose(basis_eval(spec, 1.0), basis_eval(spec, 1.0 - eps), atol=1e-8)


class TestBasisGradient:
    @pytest.mark.parametrize("grid_size,degree", [(3, 1), (5, 2), (5, 3), (8, 4)])
    def test_matches_central_difference(self, grid_size, degree):
        spec = SplineSpec(grid_size, degree)
        rng = make_rng(7)
        h = 1e-6
        # keep x away from knots so the FD stencil stays on one polynomial piece
        x = rng.uniform(0.02, 0.98, size=30)
        knots = spec.knots()
        x = x[np.min(np.abs(x[:, None] - knots[None, :]), axis=1) > 5 * h]
        num = (basis_matrix(spec, x + h) - basis_matrix(spec, x - h)) / (2 * h)
        assert np.allclose(basis_grad_matrix(spec, x), num, atol=1e-5)

    def test_zero_outside_domain(self):
        spec = SplineSpec(4, 3)
        g = basis_grad_matrix(spec, np.array([-1.0, 2.0]))
        assert np.all(g == 0.0)

    def test_grad_rows_sum_to_zero(self):
        # derivative of the constant partition-of-unity sum
        spec = SplineSpec(7, 3)
        g = basis_grad_matrix(spec, np.linspace(0.05, 0.95, 19))
        assert np.allclose(g.sum(axis=1), 0.0, atol=1e-12)

    def test_basis_grad_single_point(self):
        spec = SplineSpec(3, 2)
        x = 0.37
        assert np.allclose(basis_grad(spec, x), basis_grad_matrix(spec, np.array([x]))[0])


class TestSplineFunction:
    def test_eval_is_coefficient_dot_basis(self):
        spec = SplineSpec(5, 3)
        rng = make_rng(3)
        coef = rng.normal(size=spec.n_basis)
        fn = SplineFunction(spec, coef)
        for x in (0.0, 0.21, 0.5, 0.99, 1.0):
            assert spline_eval(fn, x) == pytest.approx(float(coef @ basis_eval(spec, x)))

    def test_eval_many_matches_scalar(self):
        spec = SplineSpec(4, 2)
        fn = SplineFunction(spec, np.arange(spec.n_basis, dtype=float))
        x = np.linspace(-0.2, 1.2, 15)
        many = spline_eval_many(fn, x)
        assert np.allclose(many, [spline_eval(fn, xi) for xi in x])

    def test_grad_matches_finite_difference(self):
        spec = SplineSpec(6, 3)
        fn = SplineFunction(spec, make_rng(11).normal(size=spec.n_basis))
        h = 1e-6
        for x in (0.13, 0.42, 0.77):
            num = (spline_eval(fn, x + h) - spline_eval(fn, x - h)) / (2 * h)
            assert spline_grad(fn, x) == pytest.approx(num, abs=1e-6)

    def test_coefficient_length_validated(self):
        spec = SplineSpec(4, 2)
        with pytest.raises(ValueError):
            SplineFunction(spec, np.zeros(spec.n_basis + 1))

    def test_constant_spline_reproduces_constant(self):
        # partition of unity makes equal coefficients an exact constant
        spec = SplineSpec(8, 3)
        fn = SplineFunction(spec, np.full(spec.n_basis, 2.5))
        x = np.linspace(0, 1, 33)
        assert np.allclose(spline_eval_many(fn, x), 2.5, atol=1e-12)
