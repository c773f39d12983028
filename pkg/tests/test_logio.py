import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fuseloc.fusion import StateEstimate
from fuseloc.geometry import Pose2D
from fuseloc.sensors import Measurement, Source
from fuseloc.simkit import read_log, read_trajectory, write_log, write_trajectory
from fuseloc.simkit.logio import LogFormatError, TruthRecord

FIXTURE = """\
{"t": 0.0, "kind": "truth", "pose": [0.0, 0.0, 0.0]}
{"t": 0.02, "kind": "encoder", "z": [0.8, 0.0], "R": [[1e-4, 0.0], [0.0, 1e-3]]}
{"t": 0.02, "kind": "compass", "z": [0.0017, 0.01], "R": [[1.5e-5, 0.0], [0.0, 1e-4]]}
"""


def assert_same_entry(a, b):
    assert type(a) is type(b)
    assert a.t == b.t
    if isinstance(a, TruthRecord):
        assert a.pose.as_array() == pytest.approx(b.pose.as_array(), abs=1e-12)
    else:
        assert a.source is b.source
        assert np.allclose(a.z, b.z, rtol=0, atol=1e-12)
        assert np.allclose(a.R, b.R, rtol=0, atol=1e-12)


def test_generated_log_round_trip(small_run, tmp_path):
    path = tmp_path / "log.jsonl"
    write_log(small_run.log, path)
    back = read_log(path)
    assert len(back) == len(small_run.log)
    for a, b in zip(small_run.log, back):
        assert_same_entry(a, b)
    # repr-precision floats make the round trip bit-exact
    write_log(back, tmp_path / "again.jsonl")
    assert (tmp_path / "again.jsonl").read_bytes() == path.read_bytes()


def test_empty_log(tmp_path):
    path = tmp_path / "empty.jsonl"
    write_log([], path)
    assert path.read_text() == ""
    assert read_log(path) == []


def test_hand_written_fixture(tmp_path):
    path = tmp_path / "f.jsonl"
    path.write_text(FIXTURE)
    log = read_log(path)
    assert len(log) == 3
    assert isinstance(log[0], TruthRecord)
    assert [e.source for e in log[1:]] == [Source.ENCODER, Source.COMPASS]
    assert log[1].z.tolist() == [0.8, 0.0]


def test_field_names_are_stable(tmp_path):
    path = tmp_path / "f.jsonl"
    write_log([TruthRecord(0.5, Pose2D(1, 2, 0.1)),
               Measurement(0.5, Source.MAP, [1, 2, 0.1], np.eye(3) * 1e-4)], path)
    lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert lines[0] == {"t": 0.5, "kind": "truth", "pose": [1.0, 2.0, 0.1]}
    assert set(lines[1]) == {"t", "kind", "z", "R"} and lines[1]["kind"] == "map"


@pytest.mark.parametrize("bad_line, lineno", [
    ('{"t": NaN, "kind": "truth", "pose": [0, 0, 0]}', 2),
    ('{"t": 1.0, "kind": "truth", "pose": [0, Infinity, 0]}', 2),
    ('{"t": 1.0, "kind": "truth", "pose": [0, 0]}', 2),
    ('{"t": 1.0, "kind": "lidar", "z": [], "R": []}', 2),
    ('{"t": 1.0, "kind": "map", "z": [0, 0, 0]}', 2),
    ('{"t": 1.0, "kind": "compass", "z": [0, 0], "R": [[1, 2], [2, 1]]}', 2),
    ('{"t": 1.0, "kind": "truth", "pose": [0, 0, 0]', 2),
    ('[1, 2, 3]', 2),
    ('{"t": -5.0, "kind": "truth", "pose": [0, 0, 0]}', 2),
    ('{"t": "nan", "kind": "truth", "pose": [0, 0, 0]}', 2),
])
def test_bad_lines_report_line_number(tmp_path, bad_line, lineno):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"t": 0.0, "kind": "truth", "pose": [0, 0, 0]}\n' + bad_line + "\n")
    with pytest.raises(LogFormatError) as info:
        read_log(path)
    assert info.value.lineno == lineno
    assert f":{lineno}:" in str(info.value)


def test_nan_is_never_written(tmp_path):
    with pytest.raises(ValueError):
        write_log([TruthRecord(float("nan"), Pose2D(0, 0, 0))], tmp_path / "x.jsonl")


def test_blank_lines_are_skipped(tmp_path):
    path = tmp_path / "f.jsonl"
    path.write_text("\n" + FIXTURE + "\n\n")
    assert len(read_log(path)) == 3


def test_trajectory_round_trip(tmp_path, rng):
    ests = []
    for k in range(20):
        a = rng.normal(size=(5, 5))
        ests.append(StateEstimate(0.05 * k, rng.normal(size=5), a @ a.T + np.eye(5)))
    write_trajectory(ests, tmp_path / "fused.jsonl")
    back = read_trajectory(tmp_path / "fused.jsonl")
    for a, b in zip(ests, back):
        assert a.t == b.t
        assert np.array_equal(a.mean, b.mean) and np.array_equal(a.cov, b.cov)


def test_trajectory_rejects_sensor_lines(tmp_path):
    path = tmp_path / "f.jsonl"
    path.write_text(FIXTURE)
    with pytest.raises(LogFormatError):
        read_trajectory(path)


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(st.lists(st.tuples(st.floats(0, 1e4), finite, finite, st.floats(-math.pi, math.pi)), max_size=20))
def test_truth_round_trip_property(tmp_path_factory, rows):
    rows.sort()
    entries = [TruthRecord(t, Pose2D(x, y, th)) for t, x, y, th in rows]
    path = tmp_path_factory.mktemp("p") / "t.jsonl"
    write_log(entries, path)
    back = read_log(path)
    assert [(e.t, e.pose.as_array().tolist()) for e in back] == \
        [(e.t, e.pose.as_array().tolist()) for e in entries]
