"""Command-line front end: ``sim``, ``fuse``, ``eval`` and ``plot``.

Typical pipeline::

    fuseloc sim --config default --seed 7 --out run/
    fuseloc fuse run/
    fuseloc eval run/

A directory argument stands for the default file names inside it
(``sensors.jsonl``, ``truth.jsonl``, ``fused.jsonl``).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from fuseloc import __version__
from fuseloc.config import ConfigError, load_config, save_config
from fuseloc.evaluation import EvaluationError, PoseSeries, evaluate
from fuseloc.fusion import FilterError, initial_estimate, run_filter
from fuseloc.plotting import plot_run
from fuseloc.simkit.logio import (
    LogFormatError, TruthRecord, read_log, read_trajectory, write_log, write_trajectory,
)
from fuseloc.simkit.simulate import FULL, simulate_run
from fuseloc.world.grid import MapFormatError, save_map

SENSORS_FILE = "sensors.jsonl"
TRUTH_FILE = "truth.jsonl"
FUSED_FILE = "fused.jsonl"

log = logging.getLogger("fuseloc")


class CliError(Exception):
    """Failure reported to the user with exit status 1."""


def _resolve(path: str | Path, default_name: str) -> Path:
    path = Path(path)
    return path / default_name if path.is_dir() else path


def _truth_series(path: Path) -> PoseSeries:
    records = [e for e in read_log(path) if isinstance(e, TruthRecord)]
    if not records:
        raise CliError(f"{path}: no truth records")
    return PoseSeries.from_truth(records)


def _estimate_series(path: Path) -> PoseSeries:
    estimates = read_trajectory(path)
    if not estimates:
        raise CliError(f"{path}: no estimates")
    return PoseSeries.from_estimates(estimates)


def cmd_sim(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out or "run")
    out.mkdir(parents=True, exist_ok=True)
    run = simulate_run(cfg.trajectory, cfg.wheels, cfg.sensors, args.seed)
    write_log(run.truth, out / TRUTH_FILE)
    write_log(run.measurements, out / SENSORS_FILE)
    save_config(cfg, out / "config.yaml")
    if cfg.sensors.map_mode == FULL and run.grid is not None:
        save_map(run.grid, out / "map.pgm", out / "map.yaml")
    log.info("wrote %d truth records and %d measurements to %s",
             len(run.truth), len(run.measurements), out)
    return 0


def cmd_fuse(args) -> int:
    cfg = load_config(args.config)
    src = _resolve(args.log, SENSORS_FILE)
    entries = read_log(src)
    estimates = run_filter(entries, initial_estimate(entries, cfg.filter), cfg.filter)
    if not estimates:
        raise CliError(f"{src}: no measurements to fuse")
    dest = Path(args.out) if args.out else src.with_name(FUSED_FILE)
    if dest.is_dir():
        dest = dest / FUSED_FILE
    write_trajectory(estimates, dest)
    log.info("wrote %d estimates to %s", len(estimates), dest)
    return 0


def _pair(args) -> tuple[Path, Path]:
    truth = _resolve(args.truth, TRUTH_FILE)
    fused = _resolve(args.fused if args.fused else args.truth, FUSED_FILE)
    return truth, fused


def cmd_eval(args) -> int:
    truth, fused = _pair(args)
    report = evaluate(_truth_series(truth), _estimate_series(fused))
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_plot(args) -> int:
    truth, fused = _pair(args)
    out = Path(args.out) if args.out else truth.parent / "plots"
    paths = plot_run(_truth_series(truth), _estimate_series(fused), out)
    for p in paths:
        log.info("wrote %s", p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--config", default="default",
                        help="YAML/JSON config file, or 'default' (the default)")
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="fuseloc", description="EKF pose fusion toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("sim", parents=[common], help="simulate truth and sensor logs")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("fuse", parents=[common], help="run the EKF over a sensor log")
    p.add_argument("log", help=f"sensor log, or a directory holding {SENSORS_FILE}")
    p.set_defaults(func=cmd_fuse)

    for name, func, text in (("eval", cmd_eval, "print an accuracy report as JSON"),
                             ("plot", cmd_plot, "write SVG charts")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("truth", help=f"truth log, or a run directory holding {TRUTH_FILE} and {FUSED_FILE}")
        p.add_argument("fused", nargs="?", help="fused trajectory (defaults to the run directory's)")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ConfigError, LogFormatError, MapFormatError, EvaluationError,
            FilterError, ValueError, OSError) as exc:
        print(f"fuseloc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
