import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fuseloc.sensors import WheelGeometry
from fuseloc.simkit.simulate import SimNoise, simulate_run
from fuseloc.simkit.trajectory import rectangle_spec

settings.register_profile(
    "fuseloc", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("fuseloc")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_run():
    """Noisy run around a 4 m x 3 m rectangle; cheap enough for unit tests."""
    spec = rectangle_spec(4.0, 3.0)
    return simulate_run(spec, WheelGeometry(), SimNoise(), seed=3)


@pytest.fixture(scope="session")
def instant_spec():
    """The default rectangle with step changes in speed and heading."""
    return rectangle_spec(accel=math.inf, turn_rate=math.inf)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record and print one pass/fail line for an acceptance criterion.

    Call ``criterion(number, passed, detail)``; the test then asserts ``passed``.
    """
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
