"""JSON-Lines sensor logs and fused trajectories.

Sensor log lines::

    {"t": 0.02, "kind": "encoder", "z": [v, w], "R": [[..], [..]]}
    {"t": 0.0, "kind": "truth", "pose": [x, y, theta]}

Fused trajectory lines::

    {"t": 0.02, "kind": "estimate", "mean": [x, y, theta, v, w], "cov": [[..] x5]}

Floats are written with ``repr`` precision so a write/read round trip is exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from fuseloc.fusion import StateEstimate
from fuseloc.geometry import Pose2D
from fuseloc.sensors import Measurement, Source

TRUTH_KIND = "truth"
ESTIMATE_KIND = "estimate"


class LogFormatError(ValueError):
    """A log line could not be parsed; ``lineno`` is 1-based."""

    def __init__(self, path, lineno: int, reason: str):
        super().__init__(f"{path}:{lineno}: {reason}")
        self.lineno = lineno


@dataclass(frozen=True)
class TruthRecord:
    t: float
    pose: Pose2D


LogEntry = Union[Measurement, TruthRecord]


def _reject_constant(name):
    raise ValueError(f"non-finite number {name} is not allowed")


def _dumps(obj) -> str:
    return json.dumps(obj, allow_nan=False, separators=(", ", ": "))


def entry_to_dict(entry: LogEntry) -> dict:
    if isinstance(entry, TruthRecord):
        p = entry.pose
        return {"t": entry.t, "kind": TRUTH_KIND, "pose": [p.x, p.y, p.theta]}
    if isinstance(entry, Measurement):
        return {
            "t": entry.t,
            "kind": entry.source.value,
            "z": [float(v) for v in entry.z],
            "R": [[float(v) for v in row] for row in entry.R],
        }
    raise TypeError(f"cannot serialize {type(entry).__name__}")


def _float_list(rec, key, n):
    values = rec[key]
    if not isinstance(values, list) or len(values) != n:
        raise ValueError(f"'{key}' must be a list of {n} numbers")
    out = [float(v) for v in values]
    if not all(math.isfinite(v) for v in out):
        raise ValueError(f"'{key}' contains non-finite values")
    return out


def _timestamp(rec) -> float:
    t = rec["t"]
    if isinstance(t, bool) or not isinstance(t, (int, float)) or not math.isfinite(t):
        raise ValueError(f"'t' must be a finite number, got {t!r}")
    return float(t)


def entry_from_dict(rec: dict) -> LogEntry:
    if not isinstance(rec, dict):
        raise ValueError("record must be a JSON object")
    t = _timestamp(rec)
    kind = rec["kind"]
    if kind == TRUTH_KIND:
        return TruthRecord(t, Pose2D(*_float_list(rec, "pose", 3)))
    try:
        source = Source(kind)
    except ValueError:
        raise ValueError(f"unknown record kind {kind!r}") from None
    z = rec["z"]
    R = rec["R"]
    return Measurement(t, source, np.array(z, dtype=float), np.array(R, dtype=float))


def _parse_lines(path: Path, convert) -> list:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line, parse_constant=_reject_constant)
                out.append(convert(rec))
            except (ValueError, KeyError, TypeError) as exc:
                if isinstance(exc, KeyError):
                    exc = f"missing field {exc}"
                raise LogFormatError(path, lineno, str(exc)) from None
    return out


def write_log(entries: Iterable[LogEntry], path) -> None:
    """Write sensor-log entries, one JSON object per line."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(_dumps(entry_to_dict(entry)) + "\n")


def read_log(path) -> list[LogEntry]:
    """Read a sensor log; raises :class:`LogFormatError` on the first bad line."""
    entries = _parse_lines(path, entry_from_dict)
    for i in range(1, len(entries)):
        if entries[i].t < entries[i - 1].t:
            raise LogFormatError(path, i + 1, "timestamps decrease")
    return entries


def write_trajectory(estimates: Iterable[StateEstimate], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for est in estimates:
            rec = {
                "t": est.t,
                "kind": ESTIMATE_KIND,
                "mean": [float(v) for v in est.mean],
                "cov": [[float(v) for v in row] for row in est.cov],
            }
            fh.write(_dumps(rec) + "\n")


def _estimate_from_dict(rec: dict) -> StateEstimate:
    if rec.get("kind") != ESTIMATE_KIND:
        raise ValueError(f"expected kind 'estimate', got {rec.get('kind')!r}")
    cov = np.array(rec["cov"], dtype=float)
    if cov.shape != (5, 5) or not np.all(np.isfinite(cov)):
        raise ValueError("'cov' must be a finite 5x5 matrix")
    return StateEstimate(_timestamp(rec), _float_list(rec, "mean", 5), cov)


def read_trajectory(path) -> list[StateEstimate]:
    return _parse_lines(path, _estimate_from_dict)
