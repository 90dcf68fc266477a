import numpy as np
import pytest

from kaclab.core import bimodal_density, gaussian_density
from kaclab.experiments import _rate_ks, sphere_table


RATE_NS = [32, 64, 128, 256, 512, 1024]


@pytest.fixture(scope="session")
def gauss():
    return gaussian_density()


@pytest.fixture(scope="session")
def bimodal():
    return bimodal_density()


@pytest.fixture(scope="session")
def gauss_table_32(gauss):
    return sphere_table(gauss, 32, range(1, 33))


@pytest.fixture(scope="session")
def bimodal_table_32(bimodal):
    return sphere_table(bimodal, 32, range(1, 33))


@pytest.fixture(scope="session")
def gauss_rate_table(gauss):
    return sphere_table(gauss, max(RATE_NS), _rate_ks(RATE_NS))


@pytest.fixture(scope="session")
def bimodal_rate_table(bimodal):
    return sphere_table(bimodal, max(RATE_NS), _rate_ks(RATE_NS))


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
