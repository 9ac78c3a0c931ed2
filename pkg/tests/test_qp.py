import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import minimize

from bandit_newton import geometry
from bandit_newton.errors import InfeasibleError, InvalidInputError
from bandit_newton.qp import (
    EllipsoidConstraint,
    FocusRegion,
    floor_eigenvalues,
    minimize_quadratic,
    minimize_smooth_convex,
    project_intersection,
)


@pytest.fixture
def disk():
    # shrunk=False examples use K itself
    return geometry.positioned(geometry.Ball(1.0, dim=2), epsilon=0.1)


class TestProjectIntersection:
    def test_ball_only(self, disk):
        np.testing.assert_allclose(project_intersection([2.0, 0.0], disk, [], shrunk=False), [1.0, 0.0])

    def test_inside_unchanged(self, disk):
        con = EllipsoidConstraint([0.0, 0.0], np.eye(2), 0.5)
        np.testing.assert_array_equal(project_intersection([0.1, 0.2], disk, [con]), [0.1, 0.2])

    def test_tighter_constraint_wins(self, disk):
        con = EllipsoidConstraint([0.0, 0.0], 4 * np.eye(2), 1.0)
        y = project_intersection([2.0, 0.0], disk, [con], shrunk=False)
        np.testing.assert_allclose(y, [0.5, 0.0], atol=1e-7)

    def test_two_ellipses_against_slsqp(self, disk, rng):
        cons = [EllipsoidConstraint([0.3, 0.0], np.diag([4.0, 1.0]), 0.5),
                EllipsoidConstraint([0.0, 0.2], np.diag([1.0, 3.0]), 0.4)]
        for _ in range(5):
            x = rng.standard_normal(2) * 2
            y = project_intersection(x, disk, cons, tol=1e-10)
            ineq = [{"type": "ineq", "fun": (lambda c: lambda z: c.radius_sq - c.value(z))(c)} for c in cons]
            ineq.append({"type": "ineq", "fun": lambda z: 0.81 - z @ z})
            ref = minimize(lambda z: np.sum((z - x) ** 2), np.array([0.15, 0.1]), constraints=ineq,
                           method="SLSQP", options={"ftol": 1e-15, "maxiter": 1000}).x
            np.testing.assert_allclose(y, ref, atol=1e-5)

    def test_disjoint_sets_infeasible(self, disk):
        cons = [EllipsoidConstraint([0.6, 0.0], np.eye(2), 0.01),
                EllipsoidConstraint([-0.6, 0.0], np.eye(2), 0.01)]
        with pytest.raises(InfeasibleError):
            project_intersection([0.0, 1.0], disk, cons, max_iter=2000)

    @settings(max_examples=30, deadline=None)
    @given(arrays(float, 2, elements=st.floats(-5, 5)))
    def test_projection_is_feasible_and_idempotent(self, x):
        pos = geometry.positioned(geometry.Box([-1, -1], [1, 1]), epsilon=0.1, check=False)
        con = EllipsoidConstraint([0.2, 0.1], np.array([[2.0, 0.5], [0.5, 1.0]]), 0.6)
        y = project_intersection(x, pos, [con], tol=1e-10)
        assert pos.gauge(y) <= 0.9 * (1 + 1e-8)
        assert con.value(y) <= 0.6 * (1 + 1e-8)
        np.testing.assert_allclose(project_intersection(y, pos, [con], tol=1e-10), y, atol=1e-7)


class TestMinimizeQuadratic:
    def test_kkt_on_ball(self, disk):
        res = minimize_quadratic(np.eye(2), [-2.0, 0.0], disk, [], shrunk=False)
        np.testing.assert_allclose(res.x, [1.0, 0.0], atol=1e-6)
        assert res.converged

    def test_unconstrained_feasible(self, disk):
        res = minimize_quadratic(np.eye(2), [-0.1, 0.0], disk, [])
        np.testing.assert_allclose(res.x, [0.1, 0.0])
        assert res.iterations == 0

    def test_origin(self, disk):
        np.testing.assert_allclose(minimize_quadratic(2 * np.eye(2), np.zeros(2), disk, []).x, 0.0)

    def test_indefinite_is_floored(self, disk):
        res = minimize_quadratic(np.diag([1.0, -0.5]), [-0.1, 0.0], disk, [])
        assert res.floored

    def test_against_slsqp(self, disk, rng):
        P = np.array([[3.0, 1.0], [1.0, 0.5]])
        b = np.array([-4.0, 1.0])
        con = EllipsoidConstraint([0.2, 0.0], np.diag([2.0, 1.0]), 0.3)
        res = minimize_quadratic(P, b, disk, [con], tol=1e-10)
        ineq = [{"type": "ineq", "fun": lambda z: 0.3 - con.value(z)},
                {"type": "ineq", "fun": lambda z: 0.81 - z @ z}]
        ref = minimize(lambda z: 0.5 * z @ P @ z + b @ z, np.array([0.2, 0.0]), constraints=ineq,
                       method="SLSQP", options={"ftol": 1e-15, "maxiter": 1000})
        assert res.value <= ref.fun + 1e-8
        np.testing.assert_allclose(res.x, ref.x, atol=1e-4)


class TestMinimizeSmoothConvex:
    def test_projection_example(self, disk):
        f = lambda x: (0.5 * np.sum((x - [3.0, 0.0]) ** 2), x - [3.0, 0.0])
        np.testing.assert_allclose(minimize_smooth_convex(f, disk, [], shrunk=False).x, [1.0, 0.0], atol=1e-5)

    def test_two_quadratics(self, disk):
        a, b = np.array([0.2, 0.1]), np.array([-0.1, 0.3])
        f = lambda x: (0.5 * np.sum((x - a) ** 2) + 0.5 * np.sum((x - b) ** 2), 2 * x - a - b)
        np.testing.assert_allclose(minimize_smooth_convex(f, disk, []).x, (a + b) / 2, atol=1e-6)

    def test_linear_support_point(self, disk):
        c = np.array([1.0, 2.0])
        res = minimize_smooth_convex(lambda x: (c @ x, c), disk, [], shrunk=False)
        np.testing.assert_allclose(res.x, -c / np.linalg.norm(c), atol=1e-5)


class TestFocusRegion:
    def test_batch_matches_single(self, rng):
        region = FocusRegion(3, capacity=2)
        for _ in range(7):
            B = rng.standard_normal((3, 3))
            region.append(EllipsoidConstraint(rng.standard_normal(3), B @ B.T + np.eye(3), 2.0))
        pts = rng.standard_normal((11, 3))
        batch = region.relative_violation(pts)
        single = np.array([region.relative_violation(p) for p in pts])
        np.testing.assert_allclose(batch, single, atol=1e-12)
        direct = np.array([[c.value(p) / c.radius_sq - 1 for c in region] for p in pts])
        np.testing.assert_allclose(single, direct, atol=1e-12)

    def test_near_active_values_exact(self):
        center = np.array([1e3, -1e3])
        region = FocusRegion(2)
        region.append(EllipsoidConstraint(center, np.eye(2) * 1e4, 1.0))
        x = center + np.array([1e-2, 0.0])  # on the boundary up to rounding of x
        # the expanded form cancels terms of size 1e10 here; the difference form does not
        assert abs(region.relative_violation(x)[0]) <= 1e-10

    def test_empty(self):
        assert FocusRegion(2).relative_violation(np.zeros(2)).shape == (0,)

    def test_bad_constraint(self):
        with pytest.raises(InvalidInputError):
            EllipsoidConstraint([0, 0], [[1.0, 2.0], [0.0, 1.0]], 1.0)
        with pytest.raises(InvalidInputError):
            EllipsoidConstraint([0, 0], np.eye(2), 0.0)


def test_floor_eigenvalues():
    P, evals, _, floored = floor_eigenvalues(np.diag([2.0, -0.5]), 1e-3)
    assert floored
    np.testing.assert_allclose(np.sort(evals), [1e-3, 2.0])
    np.testing.assert_allclose(P, np.diag([2.0, 1e-3]), atol=1e-15)
    assert not floor_eigenvalues(2 * np.eye(2), 1e-3)[3]
