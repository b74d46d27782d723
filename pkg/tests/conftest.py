import numpy as np
import pytest

from carnotlab import preset


@pytest.fixture(scope="session")
def h1():
    return preset("heisenberg-1")


@pytest.fixture(scope="session")
def h2():
    return preset("heisenberg-2")


@pytest.fixture(scope="session")
def ab3():
    return preset("abelian-3")


@pytest.fixture(scope="session")
def ht21():
    return preset("htype-2-1")


@pytest.fixture(scope="session")
def eng():
    return preset("engel")


@pytest.fixture(scope="session")
def all_presets(ab3, h1, h2, ht21, eng):
    return [ab3, h1, h2, ht21, eng]


@pytest.fixture()
def rng():
    return np.random.default_rng(20260814)
