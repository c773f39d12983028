"""Trajectory accuracy against a reference: RMSE and per-axis error series.

Estimates are linearly interpolated onto the reference timestamps (heading
along the shortest arc); reference samples outside the estimate's time span
are dropped. Heading results are reported in degrees.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fuseloc.geometry import angle_diff, wrap_angle


class EvaluationError(ValueError):
    pass


@dataclass
class PoseSeries:
    """Timestamps ``t`` (n,) and poses ``[x, y, theta]`` (n, 3)."""

    t: np.ndarray
    pose: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        self.pose = np.asarray(self.pose, dtype=float).reshape(-1, 3)
        if self.t.size != self.pose.shape[0]:
            raise ValueError("one pose per timestamp required")
        if self.t.size and np.any(np.diff(self.t) < 0):
            raise ValueError("timestamps must be non-decreasing")

    def __len__(self):
        return self.t.size

    @classmethod
    def from_estimates(cls, estimates) -> "PoseSeries":
        return cls([e.t for e in estimates], [e.mean[:3] for e in estimates])

    @classmethod
    def from_truth(cls, records) -> "PoseSeries":
        return cls([r.t for r in records], [r.pose.as_array() for r in records])

    def interpolate(self, t) -> np.ndarray:
        """Poses at ``t``; repeated timestamps resolve to the last sample."""
        t = np.asarray(t, dtype=float)
        ts, idx = np.unique(self.t[::-1], return_index=True)
        last = self.t.size - 1 - idx
        pose = self.pose[last]
        if ts.size == 1:
            return np.repeat(pose, t.size, axis=0)
        x = np.interp(t, ts, pose[:, 0])
        y = np.interp(t, ts, pose[:, 1])
        # unwrap so interpolation follows the shortest arc between samples
        heading = np.unwrap(pose[:, 2])
        theta = wrap_angle(np.interp(t, ts, heading))
        # timestamps that hit a sample exactly return it untouched
        k = np.clip(np.searchsorted(ts, t), 0, ts.size - 1)
        hit = ts[k] == t
        out = np.column_stack([x, y, theta])
        out[hit] = pose[k[hit]]
        return out


def align(ref: PoseSeries, est: PoseSeries) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reference times inside the estimate span, reference poses, interpolated estimates."""
    if len(ref) == 0 or len(est) == 0:
        raise EvaluationError("cannot evaluate an empty series")
    mask = (ref.t >= est.t[0]) & (ref.t <= est.t[-1])
    if not mask.any():
        raise EvaluationError("reference and estimate do not overlap in time")
    t = ref.t[mask]
    return t, ref.pose[mask], est.interpolate(t)


def rmse_position(ref: PoseSeries, est: PoseSeries) -> float:
    """Root-mean-square planar distance error in meters."""
    _, r, e = align(ref, est)
    return float(np.sqrt(np.mean((r[:, 0] - e[:, 0]) ** 2 + (r[:, 1] - e[:, 1]) ** 2)))


def rmse_heading(ref: PoseSeries, est: PoseSeries) -> float:
    """Root-mean-square wrapped heading error in degrees."""
    _, r, e = align(ref, est)
    return math.degrees(float(np.sqrt(np.mean(angle_diff(r[:, 2], e[:, 2]) ** 2))))


@dataclass
class ErrorSeries:
    """Signed errors ``reference - estimate`` per aligned sample (heading in radians)."""

    t: np.ndarray
    ex: np.ndarray
    ey: np.ndarray
    etheta: np.ndarray

    def __len__(self):
        return self.t.size


def error_series(ref: PoseSeries, est: PoseSeries) -> ErrorSeries:
    t, r, e = align(ref, est)
    return ErrorSeries(t, r[:, 0] - e[:, 0], r[:, 1] - e[:, 1], angle_diff(r[:, 2], e[:, 2]))


@dataclass
class EvalReport:
    rmse_position: float
    rmse_heading: float
    max_err_x: float
    max_err_y: float
    max_err_heading: float
    n_samples: int
    series: ErrorSeries

    def to_dict(self) -> dict:
        return {
            "rmse_position_m": self.rmse_position,
            "rmse_heading_deg": self.rmse_heading,
            "max_err_x_m": self.max_err_x,
            "max_err_y_m": self.max_err_y,
            "max_err_heading_deg": self.max_err_heading,
            "n_samples": self.n_samples,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)


def evaluate(ref: PoseSeries, est: PoseSeries) -> EvalReport:
    """All summary statistics from a single alignment pass."""
    s = error_series(ref, est)
    return EvalReport(
        rmse_position=float(np.sqrt(np.mean(s.ex ** 2 + s.ey ** 2))),
        rmse_heading=math.degrees(float(np.sqrt(np.mean(s.etheta ** 2)))),
        max_err_x=float(np.max(np.abs(s.ex))),
        max_err_y=float(np.max(np.abs(s.ey))),
        max_err_heading=math.degrees(float(np.max(np.abs(s.etheta)))),
        n_samples=len(s),
        series=s,
    )


def nearest_event_distance(times: Sequence[float], events: Sequence[float]) -> np.ndarray:
    """Distance from each time to the closest event time (``inf`` with no events)."""
    times = np.asarray(times, dtype=float)
    if len(events) == 0:
        return np.full(times.shape, np.inf)
    ev = np.asarray(events, dtype=float)
    return np.min(np.abs(times[..., None] - ev), axis=-1)
