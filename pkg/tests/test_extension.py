import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bandit_newton import geometry
from bandit_newton.errors import InvalidInputError
from bandit_newton.extension import assemble_Y, extend_eval, make_query


def test_query_outside(unit_disk):
    q = make_query(unit_disk, [1.8, 0.0])
    np.testing.assert_allclose(q.A, [0.9, 0.0])
    assert q.multiplier == pytest.approx(2.0)
    assert q.nudge == pytest.approx(10.0)


def test_query_inside_and_origin(unit_disk):
    for X in ([0.3, 0.0], [0.0, 0.0]):
        q = make_query(unit_disk, X)
        np.testing.assert_array_equal(q.A, X)
        assert (q.multiplier, q.nudge) == (1.0, 0.0)


def test_query_rejects_nan(unit_disk):
    with pytest.raises(InvalidInputError):
        make_query(unit_disk, [np.inf, 0.0])


def test_assemble(unit_disk):
    inside = make_query(unit_disk, [0.3, 0.0])
    outside = make_query(unit_disk, [1.8, 0.0])
    assert assemble_Y(inside, 0.4) == pytest.approx(0.4)
    assert assemble_Y(outside, 0.0) == pytest.approx(20.0)
    assert assemble_Y(outside, 0.5) == pytest.approx(21.0)
    with pytest.raises(InvalidInputError):
        assemble_Y(outside, float("nan"))


def test_extend_eval_examples(unit_disk):
    assert extend_eval(unit_disk, lambda a: 0.0, [1.8, 0.0]) == pytest.approx(20.0)
    assert extend_eval(unit_disk, lambda a: 0.5 * (1 + a[0]), [1.8, 0.0]) == pytest.approx(21.9)
    assert extend_eval(unit_disk, lambda a: 0.5 * (1 + a[0]), [0.2, 0.3]) == pytest.approx(0.6)


def test_assemble_matches_white_box(unit_disk, rng):
    loss = lambda a: 0.25 * np.sum((np.asarray(a) - 0.2) ** 2, axis=-1)
    for X in rng.standard_normal((20, 2)) * 2:
        q = make_query(unit_disk, X)
        assert assemble_Y(q, loss(q.A)) == pytest.approx(extend_eval(unit_disk, loss, X))


@settings(max_examples=40, deadline=None)
@given(arrays(float, 2, elements=st.floats(-6, 6)), arrays(float, 2, elements=st.floats(-6, 6)),
       st.floats(0.0, 1.0))
def test_extension_convex_along_segments(x, y, t):
    pos = geometry.positioned(geometry.Ball(1.0, dim=2), epsilon=0.2, check=False)
    loss = lambda a: np.max(np.asarray(a) @ np.array([[0.3, -0.2], [-0.4, 0.1]]).T, axis=-1) / 2 + 0.5
    mid = extend_eval(pos, loss, t * x + (1 - t) * y)
    assert mid <= t * extend_eval(pos, loss, x) + (1 - t) * extend_eval(pos, loss, y) + 1e-9
