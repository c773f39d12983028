import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fuseloc.geometry import angle_diff
from fuseloc.simkit import BLENDED_ARC, Trajectory, TrajectorySpec, generate_truth, rectangle_spec
from fuseloc.simkit.trajectory import TrapezoidProfile

STEP = 0.8 / 17


def test_instant_rectangle_duration_and_samples(instant_spec):
    traj = Trajectory(instant_spec)
    truth = generate_truth(instant_spec)
    assert instant_spec.perimeter == 78.0
    assert traj.duration == pytest.approx(97.5)
    assert len(truth) == 1658
    assert truth.corner_times == pytest.approx([30.0, 48.75, 78.75])


def test_straight_segment_step(instant_spec):
    truth = generate_truth(instant_spec)
    steps = np.hypot(*np.diff(truth.pose[:400, :2], axis=0).T)
    assert steps == pytest.approx(np.full(399, STEP), abs=1e-12)
    assert STEP == pytest.approx(0.0471, abs=5e-5)


def test_instant_corner_heading_step(instant_spec):
    truth = generate_truth(instant_spec)
    k = 510  # t = 30 s, the first corner
    assert truth.t[k] == pytest.approx(30.0)
    assert tuple(truth.pose[k, :2]) == pytest.approx((24.0, 0.0))
    assert angle_diff(truth.pose[k, 2], truth.pose[k - 1, 2]) == pytest.approx(math.pi / 2)


def test_stop_and_turn_holds_position_through_corner():
    spec = rectangle_spec()
    truth = generate_truth(spec)
    turning = np.flatnonzero(np.abs(truth.twist[:, 1]) > 0)
    first = turning[turning < turning[0] + 200]
    first = first[np.concatenate([[True], np.diff(first) == 1])]
    # position repeats at the corner while the heading sweeps a quarter turn
    held = truth.pose[first]
    assert np.all(held[:, :2] == held[0, :2])
    assert tuple(held[0, :2]) == pytest.approx((24.0, 0.0))
    before, after = truth.pose[first[0] - 1, 2], truth.pose[first[-1] + 1, 2]
    assert angle_diff(after, before) == pytest.approx(math.pi / 2)
    assert np.all(truth.twist[first, 0] == 0.0)


@pytest.mark.parametrize("spec", [
    rectangle_spec(),
    rectangle_spec(accel=math.inf, turn_rate=math.inf),
    rectangle_spec(corner_mode=BLENDED_ARC),
    rectangle_spec(6.0, 2.0, corner_mode=BLENDED_ARC, corner_radius=0.5, speed=0.3),
], ids=["ramped", "instant", "arc", "small-arc"])
def test_arc_length_matches_path(spec):
    traj = Trajectory(spec)
    truth = generate_truth(spec)
    travelled = np.hypot(*np.diff(truth.pose[:, :2], axis=0).T).sum()
    step = spec.speed / spec.sample_rate
    assert abs(travelled - traj.length) <= step
    if spec.corner_mode == BLENDED_ARC:
        r = spec.corner_radius
        # three blended corners; the closing corner at the start is not turned
        assert traj.length == pytest.approx(spec.perimeter - 6 * r + 1.5 * math.pi * r)
    else:
        assert traj.length == pytest.approx(spec.perimeter)


@pytest.mark.parametrize("spec", [rectangle_spec(), rectangle_spec(corner_mode=BLENDED_ARC)],
                         ids=["ramped", "arc"])
def test_twist_matches_finite_differences(spec):
    truth = generate_truth(spec)
    dt = 1.0 / spec.sample_rate
    d = np.diff(truth.pose, axis=0)
    speed_fd = np.hypot(d[:, 0], d[:, 1]) / dt
    omega_fd = angle_diff(truth.pose[1:, 2], truth.pose[:-1, 2]) / dt
    v_mid = 0.5 * (truth.twist[1:, 0] + truth.twist[:-1, 0])
    w_mid = 0.5 * (truth.twist[1:, 1] + truth.twist[:-1, 1])
    # ramped profiles: the midpoint rule is off by at most accel * dt;
    # arcs: chords fall short of the arc by a second-order term, and the yaw
    # rate jumps at the tangent points (half a jump at worst)
    if spec.corner_mode == BLENDED_ARC:
        step_turn = spec.speed / spec.corner_radius * dt
        tol_v = spec.speed * step_turn ** 2 / 24 + 1e-9
        tol_w = 0.5 * spec.speed / spec.corner_radius
    else:
        tol_v, tol_w = spec.accel * dt, spec.turn_accel * dt
    assert np.max(np.abs(speed_fd - v_mid)) <= tol_v
    assert np.max(np.abs(omega_fd - w_mid)) <= tol_w


def test_heading_tangent_to_path():
    truth = generate_truth(rectangle_spec(corner_mode=BLENDED_ARC))
    d = np.diff(truth.pose[:, :2], axis=0)
    moving = np.hypot(d[:, 0], d[:, 1]) > 1e-6
    direction = np.arctan2(d[:, 1], d[:, 0])
    mid = truth.pose[:-1, 2] + 0.5 * angle_diff(truth.pose[1:, 2], truth.pose[:-1, 2])
    # chord direction vs mean heading; exact on lines and arcs, a fraction
    # of one step's turn where the two meet
    turn_per_step = 0.8 / 1.0 / 17
    assert np.max(np.abs(angle_diff(direction[moving], mid[moving]))) < 0.25 * turn_per_step


def test_blended_arc_constant_speed():
    spec = rectangle_spec(corner_mode=BLENDED_ARC, corner_radius=2.0)
    truth = generate_truth(spec)
    assert np.allclose(truth.twist[1:-1, 0], 0.8)
    on_arc = truth.twist[:, 1] != 0
    assert np.allclose(truth.twist[on_arc, 1], 0.4)


def test_sampling_past_the_end_is_at_rest():
    traj = Trajectory(rectangle_spec())
    smp = traj.sample([-1.0, traj.duration + 5.0])
    assert np.all(smp["v"] == 0) and np.all(smp["omega"] == 0)
    assert smp["x"][1] == pytest.approx(0.0, abs=1e-9) and smp["y"][1] == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("make", [
    lambda: rectangle_spec(0.0, 15.0),
    lambda: rectangle_spec(24.0, -1.0),
    lambda: TrajectorySpec(waypoints=((0, 0),)),
    lambda: TrajectorySpec(waypoints=((0, 0), (0, 0), (1, 0))),
    lambda: rectangle_spec(speed=0.0),
    lambda: rectangle_spec(sample_rate=-17.0),
    lambda: rectangle_spec(speed=math.nan),
    lambda: rectangle_spec(corner_mode="drift"),
    lambda: Trajectory(rectangle_spec(1.0, 1.0, corner_mode=BLENDED_ARC, corner_radius=2.0)),
])
def test_invalid_specs(make):
    with pytest.raises(ValueError):
        make()


@given(st.floats(0.0, 50.0), st.floats(0.05, 5.0), st.floats(0.05, 10.0))
def test_trapezoid_profile(distance, vmax, accel):
    prof = TrapezoidProfile(distance, vmax, accel)
    tau = np.linspace(0.0, prof.duration, 200)
    pos = prof.position(tau)
    vel = prof.velocity(tau)
    assert pos[-1] == pytest.approx(distance, abs=1e-9)
    assert np.all(np.diff(pos) >= -1e-12)
    assert np.all(vel <= vmax + 1e-12) and np.all(vel >= 0)
    if distance > 0:
        assert prof.duration >= distance / vmax - 1e-12
