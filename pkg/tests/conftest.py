import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def make_toy(n=100, p=16, support=8, seed=1, tau=1.0):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, p))
    X = np.zeros((p, 1))
    X[:support] = 1.0
    Y = G @ X + np.sqrt(tau) * rng.standard_normal((n, 1))
    return Y, G, X


@pytest.fixture
def toy():
    return make_toy()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
