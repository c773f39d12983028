"""Linear measurement models and encoder tick conversion.

Every source observes a subset of the state directly, so each ``H`` is a
constant selector matrix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg.lapack import dpotrf

from fuseloc.geometry import Twist2D, wrap_angle
from fuseloc.motion import as_state_vector


class Source(str, enum.Enum):
    """Measurement origin. Values double as the ``kind`` tag in log files."""

    MAP = "map"
    ENCODER = "encoder"
    COMPASS = "compass"


H_MAP = np.array([
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0],
])
H_ENCODER = np.array([
    [0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0],
])
H_COMPASS = np.array([
    [0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0],
])

for _H in (H_MAP, H_ENCODER, H_COMPASS):
    _H.flags.writeable = False

H_BY_SOURCE = {Source.MAP: H_MAP, Source.ENCODER: H_ENCODER, Source.COMPASS: H_COMPASS}
# index of the heading component inside z, if the source measures one
ANGLE_INDEX = {Source.MAP: 2, Source.ENCODER: None, Source.COMPASS: 0}
# processing order for measurements that share a timestamp
TIE_ORDER = {Source.MAP: 0, Source.COMPASS: 1, Source.ENCODER: 2}


def h_map(s) -> np.ndarray:
    """Predicted map fix ``[x, y, theta]``."""
    return H_MAP @ as_state_vector(s)


def h_encoder(s) -> np.ndarray:
    """Predicted encoder twist ``[v, omega]``."""
    return H_ENCODER @ as_state_vector(s)


def h_compass(s) -> np.ndarray:
    """Predicted compass reading ``[theta, omega]``."""
    return H_COMPASS @ as_state_vector(s)


H_FUNCS = {Source.MAP: h_map, Source.ENCODER: h_encoder, Source.COMPASS: h_compass}


@dataclass(frozen=True, eq=False)
class Measurement:
    """One timestamped reading with its noise covariance.

    ``z`` is ``[x, y, theta]`` for map fixes, ``[v, omega]`` for encoder
    twists and ``[theta, omega]`` for compass readings.
    """

    t: float
    source: Source
    z: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        source = self.source if isinstance(self.source, Source) else Source(self.source)
        dim = H_BY_SOURCE[source].shape[0]
        t = float(self.t)
        z = np.array(self.z, dtype=float).reshape(-1)
        R = np.array(self.R, dtype=float)
        if not math.isfinite(t):
            raise ValueError(f"non-finite timestamp {self.t!r}")
        if z.shape != (dim,):
            raise ValueError(f"{source.value} measurement needs {dim} values, got {z.shape}")
        if R.shape != (dim, dim):
            raise ValueError(f"{source.value} covariance must be {dim}x{dim}, got {R.shape}")
        rows = R.tolist()
        if not all(map(math.isfinite, z.tolist() + sum(rows, []))):
            raise ValueError("measurement contains non-finite values")
        if any(abs(rows[i][j] - rows[j][i]) > 1e-12 for i in range(dim) for j in range(i)):
            raise ValueError("measurement covariance is not symmetric")
        if dpotrf(R)[1] != 0:
            raise ValueError("measurement covariance is not positive definite")
        k = ANGLE_INDEX[source]
        if k is not None:
            z[k] = wrap_angle(float(z[k]))
        z.flags.writeable = False
        R.flags.writeable = False
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "R", R)

    @classmethod
    def batch(cls, t, source, z, R) -> list["Measurement"]:
        """Build one measurement per row of ``z`` with array-wide validation.

        ``R`` is either one covariance shared by every row or a stack with
        one covariance per row.
        """
        source = Source(source)
        dim = H_BY_SOURCE[source].shape[0]
        t = np.array(t, dtype=float).reshape(-1)
        z = np.array(z, dtype=float).reshape(t.size, dim)
        R = np.array(R, dtype=float)
        if R.shape not in ((dim, dim), (t.size, dim, dim)):
            raise ValueError(f"{source.value} covariance must be {dim}x{dim} or one per row, got {R.shape}")
        if not (np.isfinite(t).all() and np.isfinite(z).all() and np.isfinite(R).all()):
            raise ValueError("measurement contains non-finite values")
        if R.size and np.abs(R - np.swapaxes(R, -1, -2)).max() > 1e-12:
            raise ValueError("measurement covariance is not symmetric")
        if R.size and not np.linalg.eigvalsh(R).min() > 0.0:
            raise ValueError("measurement covariance is not positive definite")
        k = ANGLE_INDEX[source]
        if k is not None and z.size:
            z[:, k] = wrap_angle(z[:, k])
        z.flags.writeable = False
        R.flags.writeable = False
        rows = R if R.ndim == 3 else [R] * t.size
        out = []
        for tk, zk, Rk in zip(t.tolist(), z, rows):
            m = object.__new__(cls)
            m.__dict__.update(t=tk, source=source, z=zk, R=Rk)
            out.append(m)
        return out

    @property
    def H(self) -> np.ndarray:
        return H_BY_SOURCE[self.source]

    def __eq__(self, other):
        if not isinstance(other, Measurement):
            return NotImplemented
        return (
            self.t == other.t
            and self.source is other.source
            and np.array_equal(self.z, other.z)
            and np.array_equal(self.R, other.R)
        )


@dataclass(frozen=True)
class WheelGeometry:
    """Differential-drive wheel layout. ``counts_per_rev`` includes any quadrature factor."""

    wheel_radius: float = 0.05
    track_width: float = 0.4
    counts_per_rev: float = 500.0

    def __post_init__(self):
        for name in ("wheel_radius", "track_width", "counts_per_rev"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value}")

    @property
    def meters_per_tick(self) -> float:
        return 2.0 * math.pi * self.wheel_radius / self.counts_per_rev


def ticks_to_twist(d_left, d_right, dt: float, geom: WheelGeometry) -> Twist2D:
    """Convert signed per-interval tick deltas into body twist.

    Fractional tick counts are accepted so the conversion can be inverted
    exactly in simulation.
    """
    v, omega = ticks_to_twist_arrays(d_left, d_right, dt, geom)
    return Twist2D(v, omega)


def ticks_to_twist_arrays(d_left, d_right, dt: float, geom: WheelGeometry):
    """Vectorized :func:`ticks_to_twist` returning ``(v, omega)`` arrays."""
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    s_left = geom.meters_per_tick * np.asarray(d_left, dtype=float) / dt
    s_right = geom.meters_per_tick * np.asarray(d_right, dtype=float) / dt
    return 0.5 * (s_right + s_left), (s_right - s_left) / geom.track_width


def wheel_travel_to_ticks(ds: float, dtheta: float, geom: WheelGeometry) -> tuple[float, float]:
    """Ideal (fractional) tick deltas for a body displacement ``ds`` and rotation ``dtheta``."""
    half = 0.5 * geom.track_width * dtheta
    return (ds - half) / geom.meters_per_tick, (ds + half) / geom.meters_per_tick
