"""Extended Kalman filter over ``[x, y, theta, v, omega]``.

Measurements from the three sources are fused sequentially: each one
triggers a prediction up to its timestamp followed by an update. The
covariance update uses the plain ``P - K H P`` form with ``K H P`` built
as a symmetric product; negative eigenvalues left by round-off are
clamped to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg.lapack import dpotrf

from fuseloc.geometry import TWO_PI, wrap_angle
from fuseloc.motion import ITHETA, STATE_DIM, as_state_vector, predict_state
from fuseloc.sensors import ANGLE_INDEX, H_BY_SOURCE, TIE_ORDER, Measurement, Source

# chi-square 99th percentiles for 3 and 2 degrees of freedom
CHI2_99 = {3: 11.3449, 2: 9.2103}

DEFAULT_Q = np.diag([1e-4, 1e-4, 1e-4, 1e-2, 1e-2])
DEFAULT_P0 = np.diag([0.25, 0.25, 0.1, 0.1, 0.1])

TIME_TOLERANCE = 1e-9


class FilterError(RuntimeError):
    """Raised when the filter hits a numerical failure."""


@dataclass
class StateEstimate:
    """Filter belief at time ``t``: mean state and 5x5 covariance."""

    t: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.t = float(self.t)
        self.mean = as_state_vector(self.mean).copy()
        self.mean[ITHETA] = wrap_angle(self.mean[ITHETA])
        self.cov = np.array(self.cov, dtype=float)
        if self.cov.shape != (STATE_DIM, STATE_DIM):
            raise ValueError(f"covariance must be 5x5, got {self.cov.shape}")

    def is_healthy(self, tol: float = 1e-9) -> bool:
        """Symmetric within ``tol`` and no eigenvalue below ``-tol``."""
        P = self.cov
        if not np.all(np.isfinite(P)) or np.max(np.abs(P - P.T)) > tol:
            return False
        return bool(np.linalg.eigvalsh(P).min() >= -tol)


@dataclass
class NoiseConfig:
    """Process noise, optional measurement-noise overrides and gating settings.

    ``Q`` is added once per prediction step. When an ``R_*`` entry is
    ``None`` the covariance carried by the measurement itself is used.
    """

    Q: np.ndarray = field(default_factory=lambda: DEFAULT_Q.copy())
    R_map: np.ndarray | None = None
    R_encoder: np.ndarray | None = None
    R_compass: np.ndarray | None = None
    gating: bool = True
    gate_threshold: dict = field(default_factory=lambda: {
        Source.MAP: CHI2_99[3],
        Source.ENCODER: CHI2_99[2],
        Source.COMPASS: CHI2_99[2],
    })
    P0: np.ndarray = field(default_factory=lambda: DEFAULT_P0.copy())

    def __post_init__(self):
        self.Q = _spd(self.Q, "Q", allow_zero=True)
        self.P0 = _spd(self.P0, "P0", allow_zero=True)
        for name in ("Q", "P0"):
            if getattr(self, name).shape != (STATE_DIM, STATE_DIM):
                raise ValueError(f"{name} must be {STATE_DIM}x{STATE_DIM}")
        for name, dim in (("R_map", 3), ("R_encoder", 2), ("R_compass", 2)):
            value = getattr(self, name)
            if value is not None:
                value = _spd(value, name)
                if value.shape != (dim, dim):
                    raise ValueError(f"{name} must be {dim}x{dim}")
                setattr(self, name, value)
        self.gate_threshold = {Source(k): float(v) for k, v in self.gate_threshold.items()}

    def R_for(self, m: Measurement) -> np.ndarray:
        override = getattr(self, _R_FIELD[m.source])
        return m.R if override is None else override

    def threshold_for(self, source: Source) -> float:
        if not self.gating:
            return math.inf
        if not isinstance(source, Source):
            source = Source(source)
        return self.gate_threshold.get(source, math.inf)


_R_FIELD = {Source.MAP: "R_map", Source.ENCODER: "R_encoder", Source.COMPASS: "R_compass"}


def _spd(M, name: str, allow_zero: bool = False) -> np.ndarray:
    M = np.array(M, dtype=float)
    if M.ndim == 1:
        M = np.diag(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.all(np.isfinite(M)) or not np.allclose(M, M.T, rtol=0.0, atol=1e-12):
        raise ValueError(f"{name} must be finite and symmetric")
    eig = np.linalg.eigvalsh(M)
    if eig.min() < 0 or (not allow_zero and eig.min() <= 0):
        raise ValueError(f"{name} must be positive {'semi' if allow_zero else ''}definite")
    return M


def _symmetric(P: np.ndarray) -> np.ndarray:
    P = (P + P.T) * 0.5
    # any inf or nan poisons the sum
    if not math.isfinite(P.sum()):
        raise FilterError("covariance became non-finite")
    return P


def _clamp_psd(P: np.ndarray) -> np.ndarray:
    """Zero out negative eigenvalues.

    A Cholesky factorization succeeding proves the matrix positive definite,
    so the eigen-decomposition only runs when that probe fails.
    """
    if dpotrf(P)[1] == 0:
        return P
    w, V = np.linalg.eigh(P)
    P = (V * np.maximum(w, 0.0)) @ V.T
    return 0.5 * (P + P.T)


# state components observed by each source, in measurement order
_OBSERVED_LISTS = {source: H.argmax(axis=1).tolist() for source, H in H_BY_SOURCE.items()}


def _as_slice(idx: list) -> slice:
    # basic slicing is several times cheaper than fancy indexing on tiny arrays
    step = idx[1] - idx[0]
    if any(b - a != step for a, b in zip(idx, idx[1:])):
        raise ValueError(f"observed components {idx} are not evenly spaced")
    return slice(idx[0], idx[-1] + 1, step)


_OBSERVED = {source: _as_slice(idx) for source, idx in _OBSERVED_LISTS.items()}


def _estimate(t: float, mean: np.ndarray, cov: np.ndarray) -> StateEstimate:
    # internal constructor: inputs are already validated filter arrays
    est = object.__new__(StateEstimate)
    est.t, est.mean, est.cov = t, mean, cov
    return est


_EYE5 = np.eye(STATE_DIM)


def _wrap(a: float) -> float:
    r = math.remainder(a, TWO_PI)
    return r + TWO_PI if r <= -math.pi else r


def _propagate(est: StateEstimate, dt: float, Q: np.ndarray) -> StateEstimate:
    # same algebra as predict_state / jacobian_F, inlined for the filter loop
    x, y, th, v, w = est.mean.tolist()
    c, s = math.cos(th), math.sin(th)
    mean = np.array([x + v * dt * c, y + v * dt * s, _wrap(th + w * dt), v, w])
    F = _EYE5.copy()
    F[0, 2] = -v * dt * s
    F[0, 3] = dt * c
    F[1, 2] = v * dt * c
    F[1, 3] = dt * s
    F[2, 4] = dt
    cov = F @ est.cov @ F.T
    cov += Q
    return _estimate(est.t + dt, mean, _symmetric(cov))


def predict(est: StateEstimate, dt: float, noise: NoiseConfig) -> StateEstimate:
    """Propagate mean and covariance forward by ``dt``; ``Q`` is added once."""
    dt = float(dt)
    if not math.isfinite(dt) or dt < 0.0:
        raise ValueError(f"time step must be finite and non-negative, got {dt}")
    if not math.isfinite(est.mean.sum()):
        raise FilterError("state mean is non-finite")
    return _propagate(est, dt, noise.Q)


def _innovation_list(est: StateEstimate, m: Measurement) -> list[float]:
    mean = est.mean.tolist()
    nu = [zi - mean[i] for zi, i in zip(m.z.tolist(), _OBSERVED_LISTS[m.source])]
    k = ANGLE_INDEX[m.source]
    if k is not None:
        nu[k] = _wrap(nu[k])
    return nu


def innovation(est: StateEstimate, m: Measurement) -> np.ndarray:
    """``z - h(mean)`` with the heading component taken on the circle."""
    return np.array(_innovation_list(est, m))


def _root(x: float) -> float:
    if not x > 0.0:
        raise FilterError("innovation covariance is not positive definite")
    return math.sqrt(x)


def _whitener(S: list) -> list:
    """Inverse Cholesky factor ``W`` of a 2x2 or 3x3 SPD matrix, so ``W S W^T = I``."""
    l11 = _root(S[0][0])
    l21 = S[1][0] / l11
    l22 = _root(S[1][1] - l21 * l21)
    w11, w22 = 1.0 / l11, 1.0 / l22
    w21 = -l21 * w11 * w22
    if len(S) == 2:
        return [[w11, 0.0], [w21, w22]]
    l31 = S[2][0] / l11
    l32 = (S[2][1] - l31 * l21) / l22
    w33 = 1.0 / _root(S[2][2] - l31 * l31 - l32 * l32)
    w32 = -l32 * w22 * w33
    w31 = -(l31 * w11 + l32 * w21) * w33
    return [[w11, 0.0, 0.0], [w21, w22, 0.0], [w31, w32, w33]]


def _gain_terms(est: StateEstimate, m: Measurement, R: np.ndarray):
    """Whitened gain terms ``(G, u)`` with ``G = P H^T W^T`` and ``u = W nu``.

    Every H is a row selector, so ``P H^T`` is a column subset of ``P`` and
    ``H P H^T`` the matching principal submatrix. With ``W`` the inverse
    Cholesky factor of ``S``, ``K nu = G u``, ``K H P = G G^T`` and the
    squared Mahalanobis distance is ``u . u``.
    """
    idx = _OBSERVED[m.source]
    S = est.cov[idx, idx] + R
    W = _whitener(S.tolist())
    nu = _innovation_list(est, m)
    u = [sum(wk * nk for wk, nk in zip(row, nu)) for row in W]
    G = est.cov[:, idx] @ np.array(W).T
    return G, u


def mahalanobis2(est: StateEstimate, m: Measurement, noise: NoiseConfig | None = None) -> float:
    """Squared Mahalanobis length of the innovation."""
    R = m.R if noise is None else noise.R_for(m)
    _, u = _gain_terms(est, m, R)
    return sum(x * x for x in u)


def gate(est: StateEstimate, m: Measurement, noise: NoiseConfig | None = None,
         threshold: float | None = None) -> bool:
    """True when the measurement passes the Mahalanobis gate.

    ``threshold`` defaults to the per-source value in ``noise`` (infinite
    when gating is disabled).
    """
    if threshold is None:
        threshold = math.inf if noise is None else noise.threshold_for(m.source)
    if threshold == math.inf:
        return True
    return mahalanobis2(est, m, noise) <= threshold


def update(est: StateEstimate, m: Measurement,
           noise: NoiseConfig | None = None) -> tuple[StateEstimate, bool]:
    """Correct ``est`` with ``m``.

    Returns the posterior and ``True``, or the untouched prior and ``False``
    when the measurement is rejected by the gate.
    """
    if abs(m.t - est.t) > TIME_TOLERANCE:
        raise ValueError(f"measurement at t={m.t} does not match estimate at t={est.t}; predict first")
    if noise is None:
        noise = _NO_GATING
    G, u = _gain_terms(est, m, noise.R_for(m))
    d2 = sum(x * x for x in u)
    if not math.isfinite(d2):
        raise FilterError("innovation is non-finite")
    if d2 > noise.threshold_for(m.source):
        return est, False
    mean = est.mean + G @ np.array(u)
    mean[ITHETA] = _wrap(mean[ITHETA])
    cov = est.cov - G @ G.T
    return _estimate(est.t, mean, _clamp_psd(cov)), True


_NO_GATING = NoiseConfig(gating=False)


def sort_measurements(measurements: Iterable) -> list[Measurement]:
    """Check time order and arrange ties as map, compass, encoder.

    Non-measurement records (ground truth) are dropped.
    """
    ms = [m for m in measurements if isinstance(m, Measurement)]
    for prev, cur in zip(ms, ms[1:]):
        if cur.t < prev.t:
            raise ValueError(f"log is not time-ordered: t={cur.t} follows t={prev.t}")
    return sorted(ms, key=lambda m: (m.t, TIE_ORDER[m.source]))


def initial_estimate(measurements: Sequence, noise: NoiseConfig,
                     fallback=(0.0, 0.0, 0.0, 0.0, 0.0)) -> StateEstimate:
    """Start from the first map fix (at rest) or from ``fallback``."""
    ms = [m for m in measurements if isinstance(m, Measurement)]
    for m in ms:
        if m.source is Source.MAP:
            return StateEstimate(m.t, [m.z[0], m.z[1], m.z[2], 0.0, 0.0], noise.P0)
    t0 = ms[0].t if ms else 0.0
    return StateEstimate(t0, fallback, noise.P0)


@dataclass
class FilterStep:
    """One emitted estimate plus bookkeeping about the measurement that produced it."""

    estimate: StateEstimate
    source: Source
    accepted: bool


def run_filter_steps(log: Iterable, init: StateEstimate, noise: NoiseConfig) -> list[FilterStep]:
    """Like :func:`run_filter` but keeps the source and gate outcome of each step."""
    est = init
    steps = []
    for m in sort_measurements(log):
        dt = m.t - est.t
        if dt < -TIME_TOLERANCE:
            raise ValueError(f"measurement at t={m.t} precedes the estimate at t={est.t}")
        if dt > TIME_TOLERANCE:
            est = _propagate(est, dt, noise.Q)
        else:
            est = _estimate(m.t, est.mean, est.cov)
        est, ok = update(est, m, noise)
        steps.append(FilterStep(est, m.source, ok))
    return steps


def run_filter(log: Iterable, init: StateEstimate, noise: NoiseConfig) -> list[StateEstimate]:
    """Fuse every measurement of ``log`` in time order.

    Emits one estimate per measurement; rejected measurements emit the prior.
    Measurements sharing a timestamp share one prediction.
    """
    return [step.estimate for step in run_filter_steps(log, init, noise)]


def dead_reckon(log: Iterable, init: StateEstimate) -> tuple[np.ndarray, np.ndarray]:
    """Integrate encoder twists alone, starting from ``init.mean`` at ``init.t``.

    Each encoder reading is the mean twist over the interval that ends at
    its timestamp, so it drives the prediction across that interval.
    Returns ``(times, states)`` with one row per encoder reading.
    """
    state = as_state_vector(init.mean)
    t = init.t
    times, states = [], []
    for m in sort_measurements(log):
        if m.source is not Source.ENCODER or m.t < t:
            continue
        state = state.copy()
        state[3:] = m.z
        state = predict_state(state, m.t - t)
        t = m.t
        times.append(t)
        states.append(state)
    return np.array(times), np.array(states).reshape(-1, STATE_DIM)
