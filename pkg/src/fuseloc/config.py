"""Run configuration: trajectory, wheel geometry, sensor noise and filter settings.

Config files are YAML (JSON is valid YAML, so either works) holding one flat
mapping. Every key is optional and missing keys take their defaults.
Prefixes name the group a key belongs to: ``traj_``, ``wheel_``, ``sim_``,
``mcl_`` and ``filter_``. Angles in files are degrees and end in ``_deg``;
everything else is SI (angular rates in rad/s). Example::

    traj_width: 24
    traj_height: 15
    traj_speed: 0.8
    sim_compass_sigma_deg: 0.2
    sim_map_mode: shortcut
    filter_q_diag: [1.0e-4, 1.0e-4, 1.0e-4, 1.0e-2, 1.0e-2]
    filter_gating: true

:data:`CONFIG_KEYS` lists every accepted key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from fuseloc.fusion import NoiseConfig
from fuseloc.sensors import Source, WheelGeometry
from fuseloc.simkit.simulate import SimNoise
from fuseloc.simkit.trajectory import TrajectorySpec, rectangle_spec
from fuseloc.world.mcl import MclConfig

DEFAULT_NAME = "default"

# fields stored in radians but written to files in degrees
_DEGREE_FIELDS = {"compass_sigma", "compass_step", "map_sigma_theta", "jitter_theta"}

_WHEEL_KEYS = {
    "wheel_radius": "wheel_radius",
    "wheel_track_width": "track_width",
    "wheel_counts_per_rev": "counts_per_rev",
}
_FILTER_KEYS = (
    "filter_q_diag", "filter_p0_diag", "filter_gating",
    "filter_gate_map", "filter_gate_encoder", "filter_gate_compass",
    "filter_r_map", "filter_r_encoder", "filter_r_compass",
)


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


def _file_name(prefix: str, name: str) -> str:
    return f"{prefix}{name}_deg" if name in _DEGREE_FIELDS else f"{prefix}{name}"


def _group_keys(prefix: str, cls, skip=()) -> dict:
    return {_file_name(prefix, f.name): f.name for f in fields(cls) if f.name not in skip}


_TRAJ_KEYS = {**_group_keys("traj_", TrajectorySpec), "traj_width": "width", "traj_height": "height"}
_SIM_KEYS = _group_keys("sim_", SimNoise, skip=("mcl",))
_MCL_KEYS = _group_keys("mcl_", MclConfig)

CONFIG_KEYS = tuple(sorted([*_TRAJ_KEYS, *_WHEEL_KEYS, *_SIM_KEYS, *_MCL_KEYS, *_FILTER_KEYS]))


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to simulate, fuse and evaluate one run."""

    trajectory: TrajectorySpec = field(default_factory=rectangle_spec)
    wheels: WheelGeometry = field(default_factory=WheelGeometry)
    sensors: SimNoise = field(default_factory=SimNoise)
    filter: NoiseConfig = field(default_factory=NoiseConfig)

    def to_dict(self) -> dict:
        """Flat plain-data form that :func:`config_from_dict` reads back."""
        out = {}
        for keys, obj in ((_TRAJ_KEYS, self.trajectory), (_WHEEL_KEYS, self.wheels),
                          (_SIM_KEYS, self.sensors), (_MCL_KEYS, self.sensors.mcl)):
            for key, name in keys.items():
                if name in ("width", "height"):
                    continue
                value = getattr(obj, name)
                out[key] = math.degrees(value) if name in _DEGREE_FIELDS else value
        out["traj_waypoints"] = [list(p) for p in self.trajectory.waypoints]
        nc = self.filter
        out["filter_q_diag"] = np.diag(nc.Q).tolist()
        out["filter_p0_diag"] = np.diag(nc.P0).tolist()
        out["filter_gating"] = nc.gating
        for source in Source:
            if source in nc.gate_threshold:
                out[f"filter_gate_{source.value}"] = nc.gate_threshold[source]
            R = getattr(nc, f"R_{source.value}")
            if R is not None:
                out[f"filter_r_{source.value}"] = R.tolist()
        return out


def _pick(data: dict, keys: dict) -> dict:
    out = {}
    for key, name in keys.items():
        if key in data:
            value = data[key]
            out[name] = math.radians(float(value)) if name in _DEGREE_FIELDS else value
    return out


def _trajectory(data: dict) -> TrajectorySpec:
    kw = _pick(data, _TRAJ_KEYS)
    width, height = kw.pop("width", None), kw.pop("height", None)
    if "waypoints" in kw:
        if width is not None or height is not None:
            raise ConfigError("give either traj_waypoints or traj_width/traj_height, not both")
        kw["waypoints"] = tuple(tuple(p) for p in kw["waypoints"])
        return TrajectorySpec(**kw)
    return rectangle_spec(24.0 if width is None else float(width),
                          15.0 if height is None else float(height), **kw)


def _filter(data: dict) -> NoiseConfig:
    kw = {}
    if "filter_q_diag" in data:
        kw["Q"] = np.diag(np.asarray(data["filter_q_diag"], dtype=float))
    if "filter_p0_diag" in data:
        kw["P0"] = np.diag(np.asarray(data["filter_p0_diag"], dtype=float))
    if "filter_gating" in data:
        if not isinstance(data["filter_gating"], bool):
            raise ConfigError("filter_gating must be true or false")
        kw["gating"] = data["filter_gating"]
    thresholds = NoiseConfig().gate_threshold
    for source in Source:
        key = f"filter_gate_{source.value}"
        if key in data:
            thresholds[source] = float(data[key])
        key = f"filter_r_{source.value}"
        if key in data:
            kw[f"R_{source.value}"] = np.asarray(data[key], dtype=float)
    return NoiseConfig(gate_threshold=thresholds, **kw)


def config_from_dict(data: dict | None) -> RunConfig:
    """Build a :class:`RunConfig` from a parsed flat mapping."""
    data = {} if data is None else data
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping of flat keys")
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(map(str, unknown))}")
    try:
        sensors = SimNoise(mcl=MclConfig(**_pick(data, _MCL_KEYS)), **_pick(data, _SIM_KEYS))
        return RunConfig(
            trajectory=_trajectory(data),
            wheels=WheelGeometry(**_pick(data, _WHEEL_KEYS)),
            sensors=sensors,
            filter=_filter(data),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(source: str | Path | None = None) -> RunConfig:
    """Load a configuration file, or the defaults for ``None`` / ``"default"``."""
    if source is None or str(source) == DEFAULT_NAME:
        return RunConfig()
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from exc
    return config_from_dict(data)


def save_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True), encoding="utf-8")


def noise_free(cfg: RunConfig) -> RunConfig:
    """Copy of ``cfg`` with every simulated sensor imperfection switched off."""
    s = cfg.sensors
    return replace(cfg, sensors=SimNoise.zero(
        encoder_rate=s.encoder_rate, compass_rate=s.compass_rate, map_rate=s.map_rate,
        map_mode=s.map_mode, laser_beams=s.laser_beams, laser_max_range=s.laser_max_range,
        mcl_particles=s.mcl_particles, mcl=s.mcl))
