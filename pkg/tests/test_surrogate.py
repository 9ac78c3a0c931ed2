import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandit_newton.errors import InvalidInputError, RatioOverflowError
from bandit_newton.surrogate import (
    SurrogateParams,
    density_ratio,
    estimate,
    quad_surrogate_eval,
    s_exact_quadratic,
    s_monte_carlo,
)


def params(lam, mu, precision):
    return SurrogateParams.from_precision(lam, np.atleast_1d(mu), np.atleast_2d(precision))


class TestDensityRatio:
    def test_at_mean(self):
        p = params(0.1, [0.3, -0.2], np.eye(2))
        assert density_ratio(p, p.mu, p.mu) == pytest.approx(0.9 ** -2)

    def test_hand_value(self):
        assert density_ratio(params(0.5, 0.0, 1.0), [1.0], [0.0]) == pytest.approx(2 * np.exp(-1.5))

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.01, 0.9), st.integers(1, 5))
    def test_cancellation(self, lam, d):
        mu = np.linspace(-1, 1, d)
        p = params(lam, mu, np.diag(np.arange(1, d + 1)))
        assert density_ratio(p, mu, mu) == pytest.approx((1 - lam) ** -d)

    def test_overflow(self):
        # X far out and z = X / lam: log R = log 2 + X² / 2 = 800.7
        p = params(0.5, 0.0, 1.0)
        with pytest.raises(RatioOverflowError):
            density_ratio(p, [40.0], [80.0])

    def test_batch(self, rng):
        p = params(0.2, [0.0, 0.0], [[2.0, 0.3], [0.3, 1.0]])
        X = rng.standard_normal((5, 2))
        batch = density_ratio(p, X, [0.1, 0.1])
        np.testing.assert_allclose(batch, [density_ratio(p, x, [0.1, 0.1]) for x in X])


class TestEstimate:
    def test_center_example(self):
        p = params(0.1, [0.0, 0.0], np.eye(2))
        est = estimate(p, p.mu, 1.0, p.mu)
        np.testing.assert_allclose(est.grad, 0.0)
        np.testing.assert_allclose(est.hess, -0.1 * 0.9 ** -4 * np.eye(2))
        assert est.value == pytest.approx(1 + (0.9 ** -2 - 1) / 0.1)
        assert est.value == pytest.approx(3.34568, abs=1e-5)

    def test_gradient_example(self):
        est = estimate(params(0.5, 0.0, 1.0), [1.0], 1.0, [0.0])
        assert est.ratio == pytest.approx(0.446260, abs=1e-6)
        np.testing.assert_allclose(est.grad, [1.785040], atol=1e-5)

    def test_zero_observation(self, rng):
        p = params(0.3, [0.1, 0.2], np.eye(2))
        est = estimate(p, rng.standard_normal(2), 0.0, [0.4, 0.0])
        assert est.value == 0.0
        np.testing.assert_array_equal(est.grad, 0.0)
        np.testing.assert_array_equal(est.hess, 0.0)

    def test_derivatives_match_finite_differences(self, rng):
        p = params(0.2, [0.1, -0.3], [[1.5, 0.2], [0.2, 0.8]])
        X, Y, z = rng.standard_normal(2), 0.7, np.array([0.2, 0.1])
        est = estimate(p, X, Y, z)
        h = 1e-6
        for i in range(2):
            e = np.eye(2)[i] * h
            up, down = estimate(p, X, Y, z + e), estimate(p, X, Y, z - e)
            assert est.grad[i] == pytest.approx((up.value - down.value) / (2 * h), rel=1e-6)
            np.testing.assert_allclose(est.hess[i], (up.grad - down.grad) / (2 * h), rtol=1e-5, atol=1e-8)

    def test_nan_observation(self):
        with pytest.raises(InvalidInputError):
            estimate(params(0.2, 0.0, 1.0), [0.1], np.nan, [0.0])


class TestQuadraticModel:
    def test_examples(self):
        assert quad_surrogate_eval([1.0, 0.0], np.eye(2), np.zeros(2), np.zeros(2)) == 0.0
        assert quad_surrogate_eval([1.0, 0.0], 2 * np.eye(2), np.zeros(2), [2.0, 0.0]) == pytest.approx(4.0)
        assert quad_surrogate_eval([1.0, -2.0], np.zeros((2, 2)), np.zeros(2), [1.0, 1.0]) == pytest.approx(-1.0)


class TestExactSurrogate:
    def test_hand_example(self):
        value, _, _ = s_exact_quadratic(params(0.5, 0.0, 1.0), [[1.0]], [0.0], 0.0, [2.0])
        assert value == pytest.approx(0.75)

    def test_asymmetric_rejected(self):
        with pytest.raises(InvalidInputError):
            s_exact_quadratic(params(0.5, [0.0, 0.0], np.eye(2)), [[1.0, 0.5], [0.0, 1.0]], [0, 0], 0, [0, 0])

    def test_monte_carlo_agrees(self, rng):
        p = params(0.3, [0.2, -0.1], [[2.0, 0.5], [0.5, 1.0]])
        A, b, c = np.array([[1.0, 0.2], [0.2, 0.5]]), np.array([0.3, -0.4]), 0.1
        loss = lambda X: 0.5 * np.einsum("...i,ij,...j->...", X, A, X) + X @ b + c
        z = np.array([0.5, 0.5])
        exact, _, _ = s_exact_quadratic(p, A, b, c, z)
        mc, se = s_monte_carlo(p, loss, z, 200_000, rng)
        assert abs(mc - exact) <= 3 * se

    def test_linear_is_exact(self, rng):
        p = params(0.3, [0.0, 0.0], np.eye(2))
        c = np.array([1.0, -2.0])
        mc, se = s_monte_carlo(p, lambda X: X @ c, [0.4, 0.1], 100_000, rng)
        # every sample is exact for a linear loss, so only rounding remains
        assert abs(mc - c @ [0.4, 0.1]) <= 3 * se + 1e-12

    def test_zero_samples(self, rng):
        with pytest.raises(InvalidInputError):
            s_monte_carlo(params(0.3, 0.0, 1.0), lambda X: X[..., 0], [0.0], 0, rng)


def test_params_validate():
    p = params(0.3, [0.0, 0.0], [[2.0, 0.1], [0.1, 1.0]])
    assert p.validate() is None
    np.testing.assert_allclose(p.covariance, np.linalg.inv(p.precision))
    with pytest.raises(InvalidInputError):
        params(0.3, [0.0], [[-1.0]])
