import numpy as np
import pytest

from gpmvs.poses import Pose, axis_angle


def random_rotation(rng) -> np.ndarray:
    return axis_angle(rng.normal(size=3), rng.uniform(0.0, np.pi))


def random_pose(rng, scale: float = 2.0) -> Pose:
    return Pose(random_rotation(rng), rng.uniform(-scale, scale, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
