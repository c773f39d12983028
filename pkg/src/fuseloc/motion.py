"""Constant-twist unicycle process model and its Jacobian.

The state vector is ``[x, y, theta, v, omega]``. Prediction is a first-order
Euler step; the Jacobian below is the exact derivative of that step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fuseloc.geometry import Pose2D, Twist2D, wrap_angle

STATE_DIM = 5
IX, IY, ITHETA, IV, IOMEGA = range(STATE_DIM)


@dataclass(frozen=True)
class State5:
    """Pose plus twist; ``as_array`` gives the flattened filter ordering."""

    pose: Pose2D
    twist: Twist2D

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.pose.as_array(), self.twist.as_array()])

    @classmethod
    def from_array(cls, arr) -> "State5":
        arr = as_state_vector(arr)
        return cls(Pose2D(arr[0], arr[1], arr[2]), Twist2D(arr[3], arr[4]))


def as_state_vector(s) -> np.ndarray:
    """Coerce a :class:`State5` or a length-5 sequence into a float vector."""
    if isinstance(s, State5):
        return s.as_array()
    if isinstance(s, np.ndarray) and s.shape == (STATE_DIM,) and s.dtype == np.float64:
        arr = s
    else:
        arr = np.array(s, dtype=float).reshape(-1)
        if arr.shape != (STATE_DIM,):
            raise ValueError(f"state must have {STATE_DIM} entries, got shape {arr.shape}")
    if not math.isfinite(arr.sum()):
        raise ValueError("state has non-finite entries")
    return arr


def _check_dt(dt: float) -> float:
    dt = float(dt)
    if not math.isfinite(dt) or dt < 0.0:
        raise ValueError(f"time step must be finite and non-negative, got {dt}")
    return dt


def predict_state(s, dt: float) -> np.ndarray:
    """Advance the state by ``dt`` seconds holding ``v`` and ``omega`` fixed."""
    dt = _check_dt(dt)
    x, y, theta, v, omega = as_state_vector(s).tolist()
    return np.array([
        x + v * dt * math.cos(theta),
        y + v * dt * math.sin(theta),
        wrap_angle(theta + omega * dt),
        v,
        omega,
    ])


def jacobian_F(s, dt: float) -> np.ndarray:
    """Jacobian of :func:`predict_state` with respect to the state."""
    dt = _check_dt(dt)
    _, _, theta, v, _ = as_state_vector(s).tolist()
    c, sn = math.cos(theta), math.sin(theta)
    return np.array([
        [1.0, 0.0, -v * dt * sn, dt * c, 0.0],
        [0.0, 1.0, v * dt * c, dt * sn, 0.0],
        [0.0, 0.0, 1.0, 0.0, dt],
        [0.0, 0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0],
    ])
