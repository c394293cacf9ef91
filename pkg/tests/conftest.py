import numpy as np
import pytest

from structbayes.experiments import gaussian_design


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture(scope="session")
def small_design():
    return gaussian_design(12, 5, seed=7)
