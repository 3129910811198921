import numpy as np
import pytest

from qglab import Grid, Params


@pytest.fixture(scope="session")
def grid32():
    return Grid(32)


@pytest.fixture(scope="session")
def grid16():
    return Grid(16)


@pytest.fixture(scope="session")
def grid8():
    return Grid(8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def params():
    return Params(epsilon=0.1, nu=1e-2, nu_prime=5e-3)
