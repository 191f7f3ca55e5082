import numpy as np
import pytest
from hypothesis import settings

from ecnnts.data import compute_indicators
from ecnnts.synthetic import random_walk_ohlcv

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def walk_bars():
    return random_walk_ohlcv(260, seed=3)


@pytest.fixture(scope="session")
def walk_frame(walk_bars):
    return compute_indicators(walk_bars)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
