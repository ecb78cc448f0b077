import numpy as np
import pytest

from cpnrom.benchgen import gen_allen_cahn, gen_kdv, gen_toy
from cpnrom.snapdata import XGeometry


@pytest.fixture(scope="session")
def kdv_data():
    train, test, spec = gen_kdv()
    return train, test, spec


@pytest.fixture(scope="session")
def allen_cahn_data():
    train, test, spec = gen_allen_cahn()
    return train, test, spec


@pytest.fixture(scope="session")
def toy_data():
    return gen_toy(201)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


@pytest.fixture()
def euclid3():
    return XGeometry.from_weights(3, None)
