"""Sensor simulators for the three measurement sources.

Every simulator is a pure function of its inputs and seed. Encoder readings
are the mean twist over the interval ending at their timestamp; compass and
map readings are instantaneous samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from fuseloc.geometry import Pose2D, wrap_angle
from fuseloc.sensors import (
    TIE_ORDER, Measurement, Source, WheelGeometry, ticks_to_twist_arrays, wheel_travel_to_ticks,
)
from fuseloc.simkit.logio import TruthRecord
from fuseloc.simkit.trajectory import Trajectory, TrajectorySpec
from fuseloc.world.grid import OccupancyGrid, box_room
from fuseloc.world.mcl import MclConfig, ParticleSet, mcl_localize
from fuseloc.world.raycast import simulate_scan

SHORTCUT = "shortcut"
FULL = "full"

# keeps simulator covariances positive definite when a noise term is zero
VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class SimNoise:
    """Sensor imperfections and output rates.

    Angles are radians. ``compass_lag`` is the time constant (s) of the
    first-order smoothing applied inside the compass module before its
    output is sampled.
    """

    encoder_rate: float = 50.0
    encoder_slip: float = 0.01
    encoder_rounding: bool = True
    compass_rate: float = 50.0
    compass_sigma: float = math.radians(0.2)
    compass_step: float = math.radians(0.1)
    compass_lag: float = 0.05
    gyro_sigma: float = 0.01
    map_rate: float = 17.0
    map_mode: str = SHORTCUT
    map_sigma_xy: float = 0.02
    map_sigma_theta: float = math.radians(0.5)
    laser_sigma: float = 0.008
    laser_beams: int = 271
    laser_max_range: float = 30.0
    mcl_particles: int = 300
    mcl: MclConfig = field(default_factory=MclConfig)

    def __post_init__(self):
        for name in ("encoder_rate", "compass_rate", "map_rate", "laser_max_range"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("encoder_slip", "compass_sigma", "compass_step", "compass_lag",
                     "gyro_sigma", "map_sigma_xy", "map_sigma_theta", "laser_sigma"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        if self.map_mode not in (SHORTCUT, FULL):
            raise ValueError(f"unknown map_mode {self.map_mode!r}")

    @classmethod
    def zero(cls, **overrides) -> "SimNoise":
        """Every noise source, quantizer and lag switched off."""
        base = cls(encoder_slip=0.0, encoder_rounding=False, compass_sigma=0.0,
                   compass_step=0.0, compass_lag=0.0, gyro_sigma=0.0,
                   map_sigma_xy=0.0, map_sigma_theta=0.0, laser_sigma=0.0)
        return replace(base, **overrides)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _wheel_variance(speed, tick_speed, noise: SimNoise):
    var = (noise.encoder_slip * speed) ** 2
    if noise.encoder_rounding:
        var = var + tick_speed ** 2 / 12.0
    return np.maximum(var, VARIANCE_FLOOR)


def simulate_encoder_log(traj: Trajectory, geom: WheelGeometry, noise: SimNoise,
                         seed=None) -> list[Measurement]:
    """Encoder twists at ``noise.encoder_rate``.

    Ideal tick counts come from the true path length and heading change
    over each interval; each wheel's count is scaled by ``1 + slip * N(0, 1)``
    and optionally rounded before conversion back to a twist.
    """
    rng = _rng(seed)
    t = traj.sample_times(noise.encoder_rate)
    if t.size < 2:
        return []
    smp = traj.sample(t)
    ds = np.diff(smp["distance"])
    dth = np.diff(smp["heading"])
    left, right = wheel_travel_to_ticks(ds, dth, geom)
    slip = rng.normal(size=(2, ds.size)) * noise.encoder_slip
    left = left * (1.0 + slip[0])
    right = right * (1.0 + slip[1])
    if noise.encoder_rounding:
        left, right = np.rint(left), np.rint(right)

    dt = 1.0 / noise.encoder_rate
    v, omega = ticks_to_twist_arrays(left, right, dt, geom)
    tick_speed = geom.meters_per_tick / dt
    var_l = _wheel_variance(left * tick_speed, tick_speed, noise)
    var_r = _wheel_variance(right * tick_speed, tick_speed, noise)
    L = geom.track_width
    cross = (var_r - var_l) / (2.0 * L)
    R = np.stack([
        np.column_stack([(var_l + var_r) / 4.0, cross]),
        np.column_stack([cross, (var_l + var_r) / L ** 2]),
    ], axis=1)
    return Measurement.batch(t[1:], Source.ENCODER, np.column_stack([v, omega]), R)


def quantize_angle(theta, step: float):
    """Round to the nearest multiple of ``step`` (no-op for ``step == 0``)."""
    if step <= 0:
        return wrap_angle(theta)
    return wrap_angle(step * np.round(np.asarray(theta) / step))


def simulate_compass_log(traj: Trajectory, noise: SimNoise, seed=None) -> list[Measurement]:
    """Compass heading plus gyro yaw rate at ``noise.compass_rate``.

    The heading passes through the module's first-order lag, then gets
    Gaussian noise and is quantized to ``compass_step``.
    """
    rng = _rng(seed)
    t = traj.sample_times(noise.compass_rate)
    smp = traj.sample(t)
    heading = smp["heading"]
    if noise.compass_lag > 0:
        a = math.exp(-1.0 / (noise.compass_rate * noise.compass_lag))
        lagged = np.empty_like(heading)
        lagged[0] = heading[0]
        for k in range(1, heading.size):
            lagged[k] = a * lagged[k - 1] + (1.0 - a) * heading[k]
        heading = lagged
    theta = quantize_angle(heading + rng.normal(size=t.size) * noise.compass_sigma,
                           noise.compass_step)
    omega = smp["omega"] + rng.normal(size=t.size) * noise.gyro_sigma
    R = np.diag([
        max(noise.compass_sigma ** 2 + noise.compass_step ** 2 / 12.0, VARIANCE_FLOOR),
        max(noise.gyro_sigma ** 2, VARIANCE_FLOOR),
    ])
    return Measurement.batch(t, Source.COMPASS, np.column_stack([np.atleast_1d(theta), omega]), R)


def simulate_map_log(traj: Trajectory, noise: SimNoise, seed=None,
                     grid: OccupancyGrid | None = None) -> list[Measurement]:
    """Map pose fixes at ``noise.map_rate``.

    In shortcut mode the fix is the true pose plus Gaussian noise. In full
    mode each fix comes from a simulated laser scan fed through the Monte
    Carlo localizer, initialised around the true start pose.
    """
    rng = _rng(seed)
    t = traj.sample_times(noise.map_rate)
    smp = traj.sample(t)
    poses = np.column_stack([smp["x"], smp["y"], smp["theta"]])
    if noise.map_mode == SHORTCUT:
        sig = np.array([noise.map_sigma_xy, noise.map_sigma_xy, noise.map_sigma_theta])
        z = poses + rng.normal(size=poses.shape) * sig
        R = np.diag(np.maximum(sig ** 2, VARIANCE_FLOOR))
        return Measurement.batch(t, Source.MAP, z, R)

    if grid is None:
        raise ValueError("full map mode needs an occupancy grid")
    truth = [Pose2D(*p) for p in poses]
    if not np.all(grid.is_free(poses[:, 0], poses[:, 1])):
        raise ValueError("trajectory leaves the free space of the map")
    particles = ParticleSet.gaussian(truth[0], 0.05, 0.02, noise.mcl_particles, rng)
    out = []
    prev = truth[0]
    for tk, pose in zip(t, truth):
        scan = simulate_scan(grid, pose, noise.laser_beams, noise.laser_max_range,
                             noise.laser_sigma, rng, t=float(tk))
        particles, meas = mcl_localize(particles, scan, grid, pose.relative_to(prev), rng, noise.mcl)
        prev = pose
        if meas is not None:
            out.append(meas)
    return out


def _segment_box_distance(a, b, box) -> float:
    """Distance from segment ``a-b`` to an axis-aligned box (sampled along the segment)."""
    n = max(2, int(math.hypot(b[0] - a[0], b[1] - a[1]) / 0.01) + 1)
    u = np.linspace(0.0, 1.0, n)
    x = a[0] + u * (b[0] - a[0])
    y = a[1] + u * (b[1] - a[1])
    dx = np.maximum(np.maximum(box[0] - x, x - box[2]), 0.0)
    dy = np.maximum(np.maximum(box[1] - y, y - box[3]), 0.0)
    return float(np.min(np.hypot(dx, dy)))


def scenario_room(spec: TrajectorySpec, margin: float = 2.0, resolution: float = 0.05,
                  clearance: float = 0.5) -> OccupancyGrid:
    """Walled room around the path with a few asymmetric pillars off the route.

    Pillars closer than ``clearance`` to the waypoint polyline are dropped.
    """
    xs = [p[0] for p in spec.waypoints]
    ys = [p[1] for p in spec.waypoints]
    x0, y0 = min(xs) - margin, min(ys) - margin
    w = max(xs) - min(xs) + 2 * margin
    h = max(ys) - min(ys) + 2 * margin
    cx, cy = x0 + 0.5 * w, y0 + 0.5 * h
    candidates = [
        (cx - 0.3 * w, cy - 0.1 * h, cx - 0.3 * w + 0.6, cy - 0.1 * h + 0.6),
        (cx + 0.1 * w, cy + 0.15 * h, cx + 0.1 * w + 1.0, cy + 0.15 * h + 0.4),
        (cx + 0.25 * w, cy - 0.2 * h, cx + 0.25 * w + 0.4, cy - 0.2 * h + 0.4),
    ]
    wps = spec.waypoints
    boxes = [box for box in candidates
             if min(_segment_box_distance(a, b, box) for a, b in zip(wps, wps[1:])) >= clearance]
    return box_room(w, h, resolution, origin=(x0, y0), boxes=boxes)


@dataclass
class SimulatedRun:
    """Truth samples, per-source measurement streams and the merged log."""

    truth: list[TruthRecord]
    encoder: list[Measurement]
    compass: list[Measurement]
    map: list[Measurement]
    trajectory: Trajectory
    grid: OccupancyGrid | None = None

    @property
    def measurements(self) -> list[Measurement]:
        return merge_streams(self.map, self.compass, self.encoder)

    @property
    def log(self) -> list:
        """Truth and measurements in one time-ordered list."""
        return merge_streams(self.truth, self.map, self.compass, self.encoder)



def _order(entry) -> int:
    if isinstance(entry, TruthRecord):
        return -1
    return TIE_ORDER[entry.source]


def merge_streams(*streams) -> list:
    """Merge time-ordered streams; ties go truth, map, compass, encoder."""
    merged = [e for s in streams for e in s]
    merged.sort(key=lambda e: (e.t, _order(e)))
    return merged


def simulate_run(spec: TrajectorySpec, geom: WheelGeometry, noise: SimNoise, seed: int,
                 grid: OccupancyGrid | None = None) -> SimulatedRun:
    """Generate truth at ``spec.sample_rate`` and all three sensor streams.

    Each sensor draws from its own child of ``SeedSequence(seed)`` so that
    changing one sensor's settings leaves the others' noise untouched.
    """
    traj = Trajectory(spec)
    t = traj.sample_times(spec.sample_rate)
    smp = traj.sample(t)
    truth = [TruthRecord(float(tk), Pose2D(x, y, th))
             for tk, x, y, th in zip(t, smp["x"], smp["y"], smp["theta"])]
    enc_seed, cmp_seed, map_seed = np.random.SeedSequence(seed).spawn(3)
    if noise.map_mode == FULL and grid is None:
        grid = scenario_room(spec)
    return SimulatedRun(
        truth=truth,
        encoder=simulate_encoder_log(traj, geom, noise, enc_seed),
        compass=simulate_compass_log(traj, noise, cmp_seed),
        map=simulate_map_log(traj, noise, map_seed, grid),
        trajectory=traj,
        grid=grid,
    )
