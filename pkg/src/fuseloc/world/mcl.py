"""Fixed-size bootstrap particle filter that turns laser scans into map pose fixes.

Each call propagates the particles by an odometry increment plus Gaussian
jitter, reweights them with a beam likelihood against ray-cast predictions,
and resamples systematically when the effective sample size drops below
half the particle count. The weighted mean and spread become a map-pose
measurement for the EKF.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fuseloc.geometry import Pose2D, wrap_angle
from fuseloc.sensors import Measurement, Source
from fuseloc.world.grid import OccupancyGrid
from fuseloc.world.raycast import LaserScan, cast_rays

COV_FLOOR = 1e-4


@dataclass
class MclConfig:
    jitter_xy: float = 0.03          # m, per call
    jitter_theta: float = 0.04       # rad, per call
    sigma_hit: float = 0.5           # m, beam likelihood spread
    z_rand: float = 0.05             # weight of the uniform outlier term
    beam_step: int = 8               # use every n-th beam
    resample_ratio: float = 0.5      # resample when ESS < ratio * N


@dataclass
class ParticleSet:
    """Poses ``(N, 3)`` as ``[x, y, theta]`` with normalized ``weights`` ``(N,)``."""

    poses: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.poses = np.array(self.poses, dtype=float).reshape(-1, 3)
        self.weights = np.array(self.weights, dtype=float).reshape(-1)
        if self.poses.shape[0] == 0:
            raise ValueError("particle set is empty")
        if self.weights.shape[0] != self.poses.shape[0]:
            raise ValueError("one weight per particle required")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite and non-negative")
        total = self.weights.sum()
        if total <= 0:
            raise ValueError("weights sum to zero")
        self.weights = self.weights / total
        self.poses[:, 2] = wrap_angle(self.poses[:, 2])

    def __len__(self):
        return self.poses.shape[0]

    @property
    def ess(self) -> float:
        return float(1.0 / np.sum(self.weights ** 2))

    @classmethod
    def uniform(cls, grid: OccupancyGrid, n: int, rng=None) -> "ParticleSet":
        """Spread ``n`` particles over the free cells with uniform headings."""
        rng = np.random.default_rng(rng)
        centers = grid.free_cell_centers()
        if len(centers) == 0:
            raise ValueError("map has no free cells")
        pick = rng.integers(len(centers), size=n)
        offset = rng.uniform(-0.5, 0.5, size=(n, 2)) * grid.resolution
        c, s = math.cos(grid.origin.theta), math.sin(grid.origin.theta)
        xy = centers[pick] + offset @ np.array([[c, s], [-s, c]])
        theta = rng.uniform(-math.pi, math.pi, size=n)
        return cls(np.column_stack([xy, theta]), np.full(n, 1.0 / n))

    @classmethod
    def gaussian(cls, pose: Pose2D, sigma_xy: float, sigma_theta: float, n: int,
                 rng=None) -> "ParticleSet":
        rng = np.random.default_rng(rng)
        noise = rng.normal(size=(n, 3)) * [sigma_xy, sigma_xy, sigma_theta]
        return cls(pose.as_array() + noise, np.full(n, 1.0 / n))

    def mean_and_cov(self) -> tuple[np.ndarray, np.ndarray]:
        """Weighted mean (circular for heading) and weighted sample covariance."""
        w = self.weights
        ref = self.poses[0]
        dx = self.poses[:, 0] - ref[0]
        dy = self.poses[:, 1] - ref[1]
        dth = wrap_angle(self.poses[:, 2] - ref[2])
        mean = np.array([
            ref[0] + w @ dx,
            ref[1] + w @ dy,
            wrap_angle(ref[2] + math.atan2(w @ np.sin(dth), w @ np.cos(dth))),
        ])
        resid = np.column_stack([
            self.poses[:, 0] - mean[0],
            self.poses[:, 1] - mean[1],
            wrap_angle(self.poses[:, 2] - mean[2]),
        ])
        cov = (resid * w[:, None]).T @ resid
        return mean, 0.5 * (cov + cov.T)


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = len(weights)
    positions = (rng.uniform() + np.arange(n)) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    return np.searchsorted(cumulative, positions, side="right")


def _floor_cov(cov: np.ndarray, floor: float = COV_FLOOR) -> np.ndarray:
    w, V = np.linalg.eigh(cov)
    R = (V * np.maximum(w, floor)) @ V.T
    return 0.5 * (R + R.T)


def scan_log_likelihood(poses: np.ndarray, scan: LaserScan, grid: OccupancyGrid,
                        config: MclConfig) -> np.ndarray:
    """Beam-model log-likelihood per particle; ``-inf`` off-map or inside obstacles."""
    ll = np.full(len(poses), -np.inf)
    valid = grid.is_free(poses[:, 0], poses[:, 1])
    if not valid.any():
        return ll
    idx = np.arange(0, scan.n_beams, max(1, config.beam_step))
    angles = scan.angles[idx]
    z = scan.ranges[idx]
    p = poses[valid]
    expected = cast_rays(grid, p[:, 0:1], p[:, 1:2], p[:, 2:3] + angles[None, :], scan.max_range)
    gauss = np.exp(-0.5 * ((z[None, :] - expected) / config.sigma_hit) ** 2)
    gauss /= config.sigma_hit * math.sqrt(2.0 * math.pi)
    prob = (1.0 - config.z_rand) * gauss + config.z_rand / scan.max_range
    ll[valid] = np.log(prob).sum(axis=1)
    return ll


def mcl_localize(particles: ParticleSet, scan: LaserScan, grid: OccupancyGrid,
                 motion_delta: Pose2D, rng_seed=None,
                 config: MclConfig | None = None) -> tuple[ParticleSet, Measurement | None]:
    """One motion + scan update.

    ``motion_delta`` is the body-frame pose increment since the previous
    call. Returns the new particle set and a map-pose measurement stamped
    ``scan.t``; the measurement is ``None`` when no particle can explain the
    scan (all off-map or inside obstacles), in which case the propagated
    particles keep their previous weights.
    """
    config = config or MclConfig()
    rng = np.random.default_rng(rng_seed)
    n = len(particles)
    x, y, th = particles.poses.T
    c, s = np.cos(th), np.sin(th)
    moved = np.column_stack([
        x + c * motion_delta.x - s * motion_delta.y,
        y + s * motion_delta.x + c * motion_delta.y,
        th + motion_delta.theta,
    ])
    moved += rng.normal(size=(n, 3)) * [config.jitter_xy, config.jitter_xy, config.jitter_theta]

    ll = scan_log_likelihood(moved, scan, grid, config)
    if not np.isfinite(ll).any():
        return ParticleSet(moved, particles.weights), None

    w = particles.weights * np.exp(ll - ll.max())
    if w.sum() <= 0:
        return ParticleSet(moved, particles.weights), None
    updated = ParticleSet(moved, w)
    mean, cov = updated.mean_and_cov()
    meas = Measurement(scan.t, Source.MAP, mean, _floor_cov(cov))

    if updated.ess < config.resample_ratio * n:
        keep = systematic_resample(updated.weights, rng)
        updated = ParticleSet(updated.poses[keep], np.full(n, 1.0 / n))
    return updated, meas
