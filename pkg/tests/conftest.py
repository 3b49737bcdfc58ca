import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from splatbalance.scene import Rng, Scene, look_from

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=300)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_scene(seed: int, n: int = 60, spread: float = 2.0, scale=(0.05, 0.4)) -> Scene:
    """Random Gaussians in front of ``small_camera``."""
    rng = Rng(seed)
    means = rng.uniform(-spread, spread, (n, 3))
    means[:, 2] = rng.uniform(-1.0, 1.0, n)
    return Scene(means, rng.uniform(scale[0], scale[1], (n, 3)), rng.random_quaternions(n),
                 rng.uniform(0.05, 1.0, n), rng.uniform(0.0, 1.0, (n, 3)), seed)


def small_camera(size: int = 64):
    return look_from((0.0, 0.0, 8.0), size, size, focal=float(size), name="small")


@pytest.fixture
def cam64():
    return small_camera(64)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
