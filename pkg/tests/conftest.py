from __future__ import annotations

import numpy as np
import pytest

from genco.data import synth_levels, synth_terrain
from genco.levels import LevelSpec


@pytest.fixture(scope="session")
def spec5():
    return LevelSpec.default()


@pytest.fixture(scope="session")
def spec3():
    return LevelSpec(3, 3)


@pytest.fixture(scope="session")
def levels50(spec5):
    return synth_levels(spec5, 50, 0)


@pytest.fixture(scope="session")
def terrain200():
    return synth_terrain((6, 6), 200, 0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
