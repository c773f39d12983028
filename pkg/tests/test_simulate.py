import io
import math

import numpy as np
import pytest

from fuseloc.geometry import Pose2D
from fuseloc.sensors import Source, WheelGeometry
from fuseloc.simkit import (
    FULL, SimNoise, Trajectory, TrajectorySpec, rectangle_spec, simulate_compass_log,
    simulate_encoder_log, simulate_map_log, simulate_run, write_log,
)
from fuseloc.simkit.logio import TruthRecord
from fuseloc.simkit.simulate import quantize_angle, scenario_room

GEOM = WheelGeometry()


@pytest.fixture(scope="module")
def instant_traj(instant_spec):
    return Trajectory(instant_spec)


def as_array(stream):
    return np.array([m.t for m in stream]), np.array([m.z for m in stream])


# encoder ------------------------------------------------------------------------

def test_encoder_zero_noise_round_trip(instant_traj):
    noise = SimNoise.zero()
    t, z = as_array(simulate_encoder_log(instant_traj, GEOM, noise, seed=0))
    dt = 1.0 / noise.encoder_rate
    ref = instant_traj.sample(np.concatenate([[0.0], t]))
    v_true = np.diff(ref["distance"]) / dt
    w_true = np.diff(ref["heading"]) / dt
    assert np.max(np.abs(z[:, 0] - v_true)) <= 1e-9
    assert np.max(np.abs(z[:, 1] - w_true)) <= 1e-9
    # intervals inside a leg see exactly the commanded motion
    straight = np.abs(w_true) < 1e-12
    assert np.max(np.abs(z[straight, 0] - 0.8)) <= 1e-9


def test_encoder_rounding_bound(instant_traj):
    noise = SimNoise.zero(encoder_rounding=True)
    t, z = as_array(simulate_encoder_log(instant_traj, GEOM, noise, seed=0))
    clean = as_array(simulate_encoder_log(instant_traj, GEOM, SimNoise.zero(), seed=0))[1]
    dt = 1.0 / noise.encoder_rate
    half = 2 * math.pi * GEOM.wheel_radius / (GEOM.counts_per_rev * dt) / 2
    assert np.max(np.abs(z[:, 0] - clean[:, 0])) <= half + 1e-12
    assert np.max(np.abs(z[:, 1] - clean[:, 1])) <= 2 * half / GEOM.track_width + 1e-12
    # the rounding is visible, not a no-op
    assert np.max(np.abs(z[:, 0] - clean[:, 0])) > 0.1 * half


def test_encoder_covariance_model(instant_traj):
    stream = simulate_encoder_log(instant_traj, GEOM, SimNoise(), seed=2)
    for m in stream[::97]:
        assert m.source is Source.ENCODER
        assert np.allclose(m.R, m.R.T) and np.all(np.linalg.eigvalsh(m.R) > 0)
    # slip alone is Gaussian, so its spread must match the reported variance;
    # rounding on a constant-speed leg is a fixed bias and is bounded above
    stream = simulate_encoder_log(instant_traj, GEOM, SimNoise.zero(encoder_slip=0.01), seed=2)
    t, z = as_array(stream)
    clean = as_array(simulate_encoder_log(instant_traj, GEOM, SimNoise.zero(), seed=0))[1]
    straight = clean[:, 1] == 0
    sd_model = math.sqrt(np.mean([m.R[0, 0] for m, s in zip(stream, straight) if s]))
    sd_actual = np.std(z[straight, 0] - clean[straight, 0])
    assert sd_actual == pytest.approx(sd_model, rel=0.1)


# compass ----------------------------------------------------------------------

def test_compass_zero_noise_is_quantized_truth(instant_traj):
    noise = SimNoise.zero(compass_step=math.radians(0.1))
    t, z = as_array(simulate_compass_log(instant_traj, noise, seed=0))
    smp = instant_traj.sample(t)
    assert np.array_equal(z[:, 0], quantize_angle(smp["theta"], noise.compass_step))
    assert np.array_equal(z[:, 1], smp["omega"])


def test_compass_quantizes_to_nearest_step():
    a = math.radians(0.123)
    spec = TrajectorySpec(waypoints=((0.0, 0.0), (10 * math.cos(a), 10 * math.sin(a))))
    noise = SimNoise.zero(compass_step=math.radians(0.1))
    _, z = as_array(simulate_compass_log(Trajectory(spec), noise, seed=0))
    assert np.allclose(np.degrees(z[:, 0]), 0.1, atol=1e-12)


@pytest.mark.parametrize("theta, step, expected", [
    (0.26, 0.1, 0.3), (-0.26, 0.1, -0.3), (0.123, 0.0, 0.123), (math.pi - 0.01, 0.1, 3.1), (math.pi, math.radians(0.1), math.pi),
])
def test_quantize_angle(theta, step, expected):
    assert quantize_angle(theta, step) == pytest.approx(expected, abs=1e-9)


def test_compass_lag_trails_turns():
    traj = Trajectory(rectangle_spec())
    lagged = as_array(simulate_compass_log(traj, SimNoise.zero(compass_lag=0.05), seed=0))[1]
    instant = as_array(simulate_compass_log(traj, SimNoise.zero(), seed=0))[1]
    turning = instant[:, 1] > 0
    # counter-clockwise turns: the lagged heading stays behind the truth
    diff = np.angle(np.exp(1j * (instant[turning, 0] - lagged[turning, 0])))
    assert np.all(diff >= -1e-12) and diff.max() > 0


# map --------------------------------------------------------------------------

def test_shortcut_map_zero_noise_equals_truth(instant_traj):
    t, z = as_array(simulate_map_log(instant_traj, SimNoise.zero(), seed=0))
    smp = instant_traj.sample(t)
    assert np.array_equal(z, np.column_stack([smp["x"], smp["y"], smp["theta"]]))


def test_shortcut_map_noise_level(instant_traj):
    t, z = as_array(simulate_map_log(instant_traj, SimNoise(), seed=11))
    smp = instant_traj.sample(t)
    err = (z[:, :2] - np.column_stack([smp["x"], smp["y"]]))[:1000]
    sd = err.std(axis=0, ddof=1)
    assert np.all((0.018 <= sd) & (sd <= 0.022))


def test_full_map_mode_tracks_truth():
    spec = rectangle_spec(3.0, 2.0)
    noise = SimNoise(map_mode=FULL, map_rate=5.0)
    run = simulate_run(spec, GEOM, noise, seed=1)
    assert run.grid is not None and len(run.map) > 50
    truth = np.array([[p.x, p.y] for p in (run.trajectory.pose_at(m.t) for m in run.map)])
    z = np.array([m.z[:2] for m in run.map])
    assert np.mean(np.hypot(*(z - truth).T)) < 0.1


def test_full_map_mode_rejects_path_through_walls():
    traj = Trajectory(rectangle_spec(3.0, 2.0))
    room = scenario_room(rectangle_spec(1.0, 1.0), margin=0.5)
    with pytest.raises(ValueError):
        simulate_map_log(traj, SimNoise(map_mode=FULL), seed=0, grid=room)
    with pytest.raises(ValueError):
        simulate_map_log(traj, SimNoise(map_mode=FULL), seed=0)


# whole runs -------------------------------------------------------------------------

def log_bytes(entries):
    buf = io.StringIO()
    for e in entries:
        buf.write(repr((e.t, getattr(e, "source", None), getattr(e, "z", None), getattr(e, "pose", None))))
    return buf.getvalue()


def test_same_seed_same_log(tmp_path):
    spec = rectangle_spec(4.0, 3.0)
    a = simulate_run(spec, GEOM, SimNoise(), seed=9)
    b = simulate_run(spec, GEOM, SimNoise(), seed=9)
    c = simulate_run(spec, GEOM, SimNoise(), seed=10)
    write_log(a.log, tmp_path / "a.jsonl")
    write_log(b.log, tmp_path / "b.jsonl")
    write_log(c.log, tmp_path / "c.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert (tmp_path / "a.jsonl").read_bytes() != (tmp_path / "c.jsonl").read_bytes()


def test_sensor_streams_are_independent():
    spec = rectangle_spec(4.0, 3.0)
    a = simulate_run(spec, GEOM, SimNoise(), seed=9)
    b = simulate_run(spec, GEOM, SimNoise(gyro_sigma=0.05), seed=9)
    assert log_bytes(a.map) == log_bytes(b.map)
    assert log_bytes(a.encoder) == log_bytes(b.encoder)


def test_merged_log_is_time_sorted(small_run):
    log = small_run.log
    t = np.array([e.t for e in log])
    assert np.all(np.diff(t) >= 0)
    kinds = {type(e) for e in log}
    assert TruthRecord in kinds
    assert {m.source for m in small_run.measurements} == set(Source)
    assert len(log) == len(small_run.truth) + len(small_run.encoder) + len(small_run.compass) + len(small_run.map)


def test_default_rates(small_run):
    for stream, rate in ((small_run.encoder, 50.0), (small_run.compass, 50.0), (small_run.map, 17.0)):
        t = np.array([m.t for m in stream])
        assert np.allclose(np.diff(t), 1.0 / rate)


@pytest.mark.parametrize("kwargs", [
    {"encoder_rate": 0.0}, {"compass_sigma": -1.0}, {"map_mode": "magic"}, {"laser_max_range": -2.0},
])
def test_invalid_noise(kwargs):
    with pytest.raises(ValueError):
        SimNoise(**kwargs)


def test_pose_relative_round_trip():
    a, b = Pose2D(1.0, 2.0, 0.3), Pose2D(1.5, 1.0, -2.0)
    assert a.compose(b.relative_to(a)).as_array() == pytest.approx(b.as_array())
