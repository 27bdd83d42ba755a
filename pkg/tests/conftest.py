import numpy as np
import pytest

from nsch.spectral import TorusGrid


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


@pytest.fixture
def grid1d():
    return TorusGrid(dim=1, modes_per_dim=64)


@pytest.fixture
def grid2d():
    return TorusGrid(dim=2, modes_per_dim=32)
