import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lpvmpc.scenario import shipped_scenario
from lpvmpc.sim import run

settings.register_profile("default", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def rt_records():
    return run(shipped_scenario("scenario_rt.json"))


@pytest.fixture(scope="session")
def obstacle_records():
    return run(shipped_scenario("scenario_obstacle.json"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
