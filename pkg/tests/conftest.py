import numpy as np
import pytest

from dfnkit import build_mesh, lg_m50
from dfnkit.model import DFNModel


@pytest.fixture(scope="session")
def params():
    return lg_m50()


@pytest.fixture(scope="session")
def mesh5(params):
    return build_mesh(5, 5, 5, 5, 5, params)


@pytest.fixture(scope="session")
def mesh10(params):
    return build_mesh(10, 10, 10, 10, 10, params)


@pytest.fixture(scope="session")
def model10(params, mesh10):
    return DFNModel(params, mesh10)


@pytest.fixture(scope="session")
def model5(params, mesh5):
    return DFNModel(params, mesh5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
