"""Ground-truth trajectories along a polyline of waypoints.

Two corner treatments are supported. ``stop-and-turn`` drives each leg with
a trapezoidal speed profile, stops on the corner and rotates in place with
a trapezoidal yaw-rate profile. ``blended-arc`` keeps the speed constant and
replaces each corner by a circular arc of fixed radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from fuseloc.geometry import Pose2D, Twist2D, angle_diff, wrap_angle

STOP_AND_TURN = "stop-and-turn"
BLENDED_ARC = "blended-arc"


class TrapezoidProfile:
    """Rest-to-rest motion over ``distance`` with speed and acceleration limits.

    An infinite ``accel`` gives a constant-speed profile; an infinite
    ``vmax`` gives a zero-duration (instantaneous) move.
    """

    def __init__(self, distance: float, vmax: float, accel: float = math.inf):
        if distance < 0 or vmax <= 0 or accel <= 0:
            raise ValueError("profile needs distance >= 0 and positive limits")
        self.distance = float(distance)
        if distance == 0 or math.isinf(vmax):
            self.t_ramp, self.t_cruise, self.v_peak, self.accel = 0.0, 0.0, 0.0, math.inf
        elif math.isinf(accel):
            self.t_ramp, self.t_cruise, self.v_peak, self.accel = 0.0, distance / vmax, vmax, math.inf
        else:
            t_ramp = vmax / accel
            if vmax * t_ramp >= distance:
                v_peak = math.sqrt(distance * accel)
                self.t_ramp, self.t_cruise, self.v_peak = v_peak / accel, 0.0, v_peak
            else:
                self.t_ramp, self.t_cruise, self.v_peak = t_ramp, (distance - vmax * t_ramp) / vmax, vmax
            self.accel = float(accel)
        self.duration = 2.0 * self.t_ramp + self.t_cruise

    def position(self, tau: np.ndarray) -> np.ndarray:
        if self.duration == 0.0:
            return np.full(np.shape(tau), self.distance)
        tau = np.clip(tau, 0.0, self.duration)
        if self.t_ramp == 0.0:
            return self.v_peak * tau
        a, tr, tc = self.accel, self.t_ramp, self.t_cruise
        d_ramp = 0.5 * a * tr * tr
        t_dec = tr + tc
        rem = self.duration - tau
        return np.where(
            tau < tr, 0.5 * a * tau * tau,
            np.where(tau < t_dec, d_ramp + self.v_peak * (tau - tr), self.distance - 0.5 * a * rem * rem),
        )

    def velocity(self, tau: np.ndarray) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        if self.duration == 0.0:
            return np.zeros(np.shape(tau))
        inside = (tau >= 0.0) & (tau <= self.duration)
        if self.t_ramp == 0.0:
            return np.where(inside, self.v_peak, 0.0)
        tc = np.clip(tau, 0.0, self.duration)
        v = np.minimum(np.minimum(self.accel * tc, self.v_peak), self.accel * (self.duration - tc))
        return np.where(inside, v, 0.0)


@dataclass
class _Segment:
    start_time: float
    x0: float
    y0: float
    heading0: float       # unwrapped
    s0: float             # path length travelled before the segment

    duration: float = 0.0
    length: float = 0.0
    turn: float = 0.0     # signed heading change over the segment

    def evaluate(self, tau):  # pragma: no cover - overridden
        raise NotImplementedError


@dataclass
class _Line(_Segment):
    profile: TrapezoidProfile = None

    def evaluate(self, tau):
        s = self.profile.position(tau)
        v = self.profile.velocity(tau)
        c, sn = math.cos(self.heading0), math.sin(self.heading0)
        zeros = np.zeros_like(s)
        return self.x0 + s * c, self.y0 + s * sn, self.heading0 + zeros, s, v, zeros


@dataclass
class _Turn(_Segment):
    profile: TrapezoidProfile = None

    def evaluate(self, tau):
        sign = math.copysign(1.0, self.turn)
        phi = sign * self.profile.position(tau)
        w = sign * self.profile.velocity(tau)
        zeros = np.zeros_like(phi)
        return self.x0 + zeros, self.y0 + zeros, self.heading0 + phi, zeros, zeros, w


@dataclass
class _Arc(_Segment):
    radius: float = 1.0
    speed: float = 1.0

    def evaluate(self, tau):
        sign = math.copysign(1.0, self.turn)
        s = self.speed * np.clip(tau, 0.0, self.duration)
        h = self.heading0 + sign * s / self.radius
        cx = self.x0 - sign * self.radius * math.sin(self.heading0)
        cy = self.y0 + sign * self.radius * math.cos(self.heading0)
        x = cx + sign * self.radius * np.sin(h)
        y = cy - sign * self.radius * np.cos(h)
        v = np.full_like(s, self.speed)
        return x, y, h, s, v, v * sign / self.radius


@dataclass(frozen=True)
class TrajectorySpec:
    """Waypoint path plus speed, sampling and corner settings.

    ``accel`` limits the forward acceleration on each leg in stop-and-turn
    mode; ``turn_rate`` and ``turn_accel`` shape the in-place rotation.
    Infinite values give step changes.
    """

    waypoints: tuple = ((0.0, 0.0), (24.0, 0.0), (24.0, 15.0), (0.0, 15.0), (0.0, 0.0))
    speed: float = 0.8
    sample_rate: float = 17.0
    corner_mode: str = STOP_AND_TURN
    corner_radius: float = 1.0
    accel: float = 1.0
    turn_rate: float = 1.0
    turn_accel: float = 2.0

    def __post_init__(self):
        wps = tuple((float(x), float(y)) for x, y in self.waypoints)
        object.__setattr__(self, "waypoints", wps)
        if len(wps) < 2:
            raise ValueError("trajectory needs at least two waypoints")
        for name in ("speed", "sample_rate", "corner_radius", "accel", "turn_rate", "turn_accel"):
            value = float(getattr(self, name))
            if math.isnan(value) or value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if math.isinf(self.speed) or math.isinf(self.sample_rate):
            raise ValueError("speed and sample_rate must be finite")
        if self.corner_mode not in (STOP_AND_TURN, BLENDED_ARC):
            raise ValueError(f"unknown corner_mode {self.corner_mode!r}")
        for a, b in zip(wps, wps[1:]):
            if math.hypot(b[0] - a[0], b[1] - a[1]) <= 1e-9:
                raise ValueError("degenerate path: repeated waypoint")

    @property
    def perimeter(self) -> float:
        w = self.waypoints
        return sum(math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(w, w[1:]))


def rectangle_spec(width: float = 24.0, height: float = 15.0, **kwargs) -> TrajectorySpec:
    """Closed counter-clockwise rectangle starting at the origin heading +x."""
    if not (width > 0 and height > 0):
        raise ValueError("degenerate rectangle")
    wps = ((0.0, 0.0), (width, 0.0), (width, height), (0.0, height), (0.0, 0.0))
    return TrajectorySpec(waypoints=wps, **kwargs)


class Trajectory:
    """Continuous-time ground truth built from a :class:`TrajectorySpec`."""

    def __init__(self, spec: TrajectorySpec):
        self.spec = spec
        self.segments: list[_Segment] = []
        self._corner_times: list[float] = []
        if spec.corner_mode == STOP_AND_TURN:
            self._build_stop_and_turn()
        else:
            self._build_blended()
        last = self.segments[-1]
        self.duration = last.start_time + last.duration
        self.length = last.s0 + last.length

    @staticmethod
    def _legs(wps):
        headings = [math.atan2(b[1] - a[1], b[0] - a[0]) for a, b in zip(wps, wps[1:])]
        lengths = [math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(wps, wps[1:])]
        turns = [angle_diff(h1, h0) for h0, h1 in zip(headings, headings[1:])]
        return headings, lengths, turns

    def _build_stop_and_turn(self):
        spec = self.spec
        headings, lengths, turns = self._legs(spec.waypoints)
        t, s, h = 0.0, 0.0, headings[0]
        for i, (length, (x0, y0)) in enumerate(zip(lengths, spec.waypoints)):
            prof = TrapezoidProfile(length, spec.speed, spec.accel)
            self.segments.append(_Line(t, x0, y0, h, s, prof.duration, length, 0.0, profile=prof))
            t += prof.duration
            s += length
            if i < len(turns):
                turn = turns[i]
                xc, yc = spec.waypoints[i + 1]
                prof = TrapezoidProfile(abs(turn), spec.turn_rate, spec.turn_accel)
                self.segments.append(_Turn(t, xc, yc, h, s, prof.duration, 0.0, turn, profile=prof))
                self._corner_times.append(t + 0.5 * prof.duration)
                t += prof.duration
                h += turn

    def _build_blended(self):
        spec = self.spec
        headings, lengths, turns = self._legs(spec.waypoints)
        r = spec.corner_radius
        cut = [r * math.tan(0.5 * abs(turn)) for turn in turns]
        t, s, h = 0.0, 0.0, headings[0]
        for i, length in enumerate(lengths):
            before = cut[i - 1] if i > 0 else 0.0
            after = cut[i] if i < len(turns) else 0.0
            line_len = length - before - after
            if line_len < -1e-9:
                raise ValueError("corner radius too large for the leg lengths")
            line_len = max(line_len, 0.0)
            ax, ay = spec.waypoints[i]
            x0 = ax + before * math.cos(h)
            y0 = ay + before * math.sin(h)
            prof = TrapezoidProfile(line_len, spec.speed)
            self.segments.append(_Line(t, x0, y0, h, s, prof.duration, line_len, 0.0, profile=prof))
            t += prof.duration
            s += line_len
            if i < len(turns):
                turn = turns[i]
                arc_len = r * abs(turn)
                x1 = x0 + line_len * math.cos(h)
                y1 = y0 + line_len * math.sin(h)
                dur = arc_len / spec.speed
                self.segments.append(_Arc(t, x1, y1, h, s, dur, arc_len, turn, radius=r, speed=spec.speed))
                self._corner_times.append(t + 0.5 * dur)
                t += dur
                s += arc_len
                h += turn

    @property
    def corner_times(self) -> list[float]:
        """Mid-time of each corner manoeuvre."""
        return list(self._corner_times)

    def sample(self, t) -> dict:
        """Evaluate the trajectory at times ``t`` (clamped to ``[0, duration]``).

        Returns arrays ``x, y, theta`` (wrapped), ``heading`` (unwrapped),
        ``distance`` (cumulative path length), ``v`` and ``omega``.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = {k: np.empty_like(t) for k in ("x", "y", "heading", "distance", "v", "omega")}
        tc = np.clip(t, 0.0, self.duration)
        idx = np.searchsorted([seg.start_time for seg in self.segments], tc, side="right") - 1
        # zero-length segments never own a sample; the next segment takes over
        for i, seg in enumerate(self.segments):
            mask = idx == i
            if not mask.any():
                continue
            x, y, h, s, v, w = seg.evaluate(tc[mask] - seg.start_time)
            out["x"][mask], out["y"][mask], out["heading"][mask] = x, y, h
            out["distance"][mask] = seg.s0 + s
            out["v"][mask], out["omega"][mask] = v, w
        beyond = (t < 0.0) | (t > self.duration)
        out["v"][beyond] = 0.0
        out["omega"][beyond] = 0.0
        out["theta"] = wrap_angle(out["heading"])
        return out

    def pose_at(self, t: float) -> Pose2D:
        smp = self.sample([t])
        return Pose2D(smp["x"][0], smp["y"][0], smp["theta"][0])

    def sample_times(self, rate: float, start_index: int = 0) -> np.ndarray:
        """Times ``k / rate`` for ``k >= start_index`` that fall inside the run."""
        n = int(math.floor(self.duration * rate + 1e-9))
        return np.arange(start_index, n + 1) / rate


@dataclass
class TruthTrack:
    """Sampled ground truth: ``t`` (n,), ``pose`` (n, 3) and ``twist`` (n, 2)."""

    t: np.ndarray
    pose: np.ndarray
    twist: np.ndarray
    corner_times: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    def __iter__(self):
        for t, p, w in zip(self.t, self.pose, self.twist):
            yield float(t), Pose2D(*p), Twist2D(*w)


def generate_truth(spec: TrajectorySpec) -> TruthTrack:
    """Sample the trajectory described by ``spec`` at ``spec.sample_rate``."""
    traj = Trajectory(spec)
    t = traj.sample_times(spec.sample_rate)
    smp = traj.sample(t)
    pose = np.column_stack([smp["x"], smp["y"], smp["theta"]])
    twist = np.column_stack([smp["v"], smp["omega"]])
    return TruthTrack(t, pose, twist, traj.corner_times)
