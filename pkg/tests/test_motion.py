import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fuseloc.geometry import Pose2D, Twist2D
from fuseloc.motion import State5, as_state_vector, jacobian_F, predict_state


def numeric_jacobian(s, dt, h=1e-6):
    """Central differences of predict_state with the heading row unwrapped."""
    J = np.zeros((5, 5))
    for j in range(5):
        e = np.zeros(5)
        e[j] = h
        hi, lo = predict_state(s + e, dt), predict_state(s - e, dt)
        d = hi - lo
        d[2] = math.remainder(d[2], 2 * math.pi)
        J[:, j] = d / (2 * h)
    return J


@pytest.mark.parametrize(
    "state, dt, expected",
    [
        ([0, 0, 0, 1, 0], 0.1, [0.1, 0, 0, 1, 0]),
        ([0, 0, 0, 1, math.pi], 0.5, [0.5, 0, math.pi / 2, 1, math.pi]),
        ([1, 2, 0.3, 0.8, 0.1], 0.0, [1, 2, 0.3, 0.8, 0.1]),
    ],
)
def test_predict_state_examples(state, dt, expected):
    assert predict_state(state, dt) == pytest.approx(expected, abs=1e-12)


def test_predict_state_wraps_heading():
    out = predict_state([0, 0, 3.0, 0, 1.0], 0.5)
    assert out[2] == pytest.approx(3.5 - 2 * math.pi)


@pytest.mark.parametrize("dt", [-0.1, math.nan, math.inf])
def test_bad_dt_rejected(dt):
    with pytest.raises(ValueError):
        predict_state([0, 0, 0, 1, 0], dt)
    with pytest.raises(ValueError):
        jacobian_F([0, 0, 0, 1, 0], dt)


def test_bad_state_rejected():
    with pytest.raises(ValueError):
        predict_state([0, 0, 0, 1], 0.1)
    with pytest.raises(ValueError):
        predict_state([0, 0, math.nan, 1, 0], 0.1)


def test_jacobian_identity_at_zero_dt():
    assert np.array_equal(jacobian_F([1, 2, 0.3, 0.8, 0.1], 0.0), np.eye(5))


def test_jacobian_entries_at_17_hz():
    F = jacobian_F([0, 0, 0, 0.8, 0], 1 / 17)
    assert F[0, 3] == pytest.approx(0.0588, abs=5e-5)
    assert F[0, 2] == 0.0
    assert F[1, 2] == pytest.approx(0.0471, abs=5e-5)
    assert F[2, 4] == pytest.approx(1 / 17)


def test_jacobian_matches_finite_differences_at_fixed_state():
    s = np.array([1, 2, 0.3, 0.8, 0.1])
    assert np.abs(jacobian_F(s, 0.06) - numeric_jacobian(s, 0.06)).max() <= 1e-6


states = arrays(np.float64, 5, elements=st.floats(-5, 5))


@given(states, st.sampled_from([0.01, 1 / 17, 0.1]))
def test_jacobian_property(s, dt):
    assert np.abs(jacobian_F(s, dt) - numeric_jacobian(s, dt)).max() <= 1e-6


@given(states, st.floats(0, 1))
def test_twist_is_preserved(s, dt):
    out = predict_state(s, dt)
    assert out[3] == s[3] and out[4] == s[4]


@given(states, st.floats(0, 1))
def test_straight_line_displacement(s, dt):
    s = s.copy()
    s[4] = 0.0
    s[2] = math.remainder(s[2], 2 * math.pi)
    out = predict_state(s, dt)
    assert out[2] == pytest.approx(s[2], abs=1e-12)
    assert math.hypot(out[0] - s[0], out[1] - s[1]) == pytest.approx(abs(s[3]) * dt, abs=1e-12)


def test_state5_round_trip():
    st5 = State5(Pose2D(1, 2, 0.3), Twist2D(0.8, 0.1))
    arr = st5.as_array()
    assert arr.tolist() == pytest.approx([1, 2, 0.3, 0.8, 0.1])
    assert State5.from_array(arr) == st5
    assert np.array_equal(as_state_vector(st5), arr)
    assert predict_state(st5, 0.0) == pytest.approx(arr)
