import numpy as np
import pytest

from bearing_slam.acceptance import cached_run


@pytest.fixture(scope="session")
def pe_run():
    return cached_run("pe")


@pytest.fixture(scope="session")
def ie_run():
    return cached_run("ie")


@pytest.fixture(scope="session")
def ie_noisy_run():
    return cached_run("ie", noise=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
