"""Planar pose and angle primitives.

Angles are radians everywhere inside the package and are wrapped to the
half-open interval ``(-pi, pi]`` so that ``pi`` has a single representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta):
    """Wrap an angle (or an array of angles) into ``(-pi, pi]``.

    Raises
    ------
    ValueError
        If any input is NaN or infinite.
    """
    if type(theta) is float or np.ndim(theta) == 0:
        theta = float(theta)
        if not math.isfinite(theta):
            raise ValueError(f"cannot wrap non-finite angle {theta!r}")
        r = math.remainder(theta, TWO_PI)
        if r <= -math.pi:
            r += TWO_PI
        return r
    arr = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("cannot wrap non-finite angles")
    r = np.remainder(arr + math.pi, TWO_PI) - math.pi
    # remainder lands in [-pi, pi); move the closed end over to +pi
    r[r <= -math.pi] += TWO_PI
    # angles already in range pass through bit-for-bit
    inside = (arr > -math.pi) & (arr <= math.pi)
    return np.where(inside, arr, r)


def angle_diff(a, b):
    """Signed shortest rotation from ``b`` to ``a``, wrapped into ``(-pi, pi]``."""
    if np.ndim(a) == 0 and np.ndim(b) == 0:
        a, b = float(a), float(b)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError("angle_diff needs finite inputs")
        return wrap_angle(a - b)
    return wrap_angle(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))


@dataclass(frozen=True)
class Pose2D:
    """Position in meters and heading in radians (stored wrapped)."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite position ({self.x}, {self.y})")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    @classmethod
    def from_array(cls, arr) -> "Pose2D":
        x, y, theta = (float(v) for v in arr)
        return cls(x, y, theta)

    def compose(self, delta: "Pose2D") -> "Pose2D":
        """Apply ``delta`` expressed in this pose's body frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2D(
            self.x + c * delta.x - s * delta.y,
            self.y + s * delta.x + c * delta.y,
            self.theta + delta.theta,
        )

    def relative_to(self, other: "Pose2D") -> "Pose2D":
        """Body-frame increment that takes ``other`` to this pose."""
        dx, dy = self.x - other.x, self.y - other.y
        c, s = math.cos(other.theta), math.sin(other.theta)
        return Pose2D(c * dx + s * dy, -s * dx + c * dy, angle_diff(self.theta, other.theta))


@dataclass(frozen=True)
class Twist2D:
    """Forward speed ``v`` (m/s) and yaw rate ``omega`` (rad/s)."""

    v: float
    omega: float

    def __post_init__(self):
        if not (math.isfinite(self.v) and math.isfinite(self.omega)):
            raise ValueError(f"non-finite twist ({self.v}, {self.omega})")
        object.__setattr__(self, "v", float(self.v))
        object.__setattr__(self, "omega", float(self.omega))

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.omega])
