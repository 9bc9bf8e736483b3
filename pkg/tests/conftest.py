from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from infogeo_sensor.config import load_scenario
from infogeo_sensor.planner import replan_loop
from infogeo_sensor.sensor_model import SensorConfiguration

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def random_geometry(rng: np.random.Generator, min_range: float = 0.5):
    """Two sensors in [-2, 2]² and a target in [-0.5, 0.5]², all ranges >= ``min_range``."""
    while True:
        sensors = rng.uniform(-2.0, 2.0, size=(2, 2))
        target = rng.uniform(-0.5, 0.5, size=2)
        if np.all(np.linalg.norm(sensors - target, axis=1) >= min_range):
            return SensorConfiguration.from_positions(sensors), target


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fig3_scenario():
    return load_scenario(SCENARIO_DIR / "fig3.scenario")


@pytest.fixture
def perturbed_scenario():
    return load_scenario(SCENARIO_DIR / "perturbed.scenario")


@pytest.fixture
def fig3_sigma():
    return SensorConfiguration.from_positions([[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture(scope="session")
def fig3_trace():
    return replan_loop(load_scenario(SCENARIO_DIR / "fig3.scenario"))
