import os
from pathlib import Path

import numpy as np
import pytest

from app.core import Configuration, ObjectiveSample

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def sample(g: int, t: int, time_s: float, energy_j: float) -> ObjectiveSample:
    return ObjectiveSample(time_s=time_s, dynamic_energy_j=energy_j, config=Configuration.of(g, t))
