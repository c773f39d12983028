"""Ground-truth trajectories, sensor simulators and JSONL log files."""

from fuseloc.simkit.logio import (
    LogFormatError, TruthRecord, read_log, read_trajectory, write_log, write_trajectory,
)
from fuseloc.simkit.simulate import (
    FULL, SHORTCUT, SimNoise, SimulatedRun, merge_streams, scenario_room, simulate_compass_log,
    simulate_encoder_log, simulate_map_log, simulate_run,
)
from fuseloc.simkit.trajectory import (
    BLENDED_ARC, STOP_AND_TURN, Trajectory, TrajectorySpec, TruthTrack, generate_truth, rectangle_spec,
)

__all__ = [
    "BLENDED_ARC", "FULL", "LogFormatError", "SHORTCUT", "STOP_AND_TURN", "SimNoise", "SimulatedRun",
    "Trajectory", "TrajectorySpec", "TruthRecord", "TruthTrack", "generate_truth", "merge_streams",
    "read_log", "read_trajectory", "rectangle_spec", "scenario_room", "simulate_compass_log",
    "simulate_encoder_log", "simulate_map_log", "simulate_run", "write_log", "write_trajectory",
]
