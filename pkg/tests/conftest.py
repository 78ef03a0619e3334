import numpy as np
import pytest

from jacobnet.dataset import SampleOptions, rand_kine
from jacobnet.robots import fanuc_am120ib_10l, puma560


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def fanuc():
    return fanuc_am120ib_10l()


@pytest.fixture(scope="session")
def puma():
    return puma560()


@pytest.fixture(scope="session")
def puma_family():
    """A fixed list of randomly drawn PUMA-template manipulators."""
    rng = np.random.default_rng(99)
    return [rand_kine(rng, SampleOptions()) for _ in range(50)]
