import numpy as np
import pytest

from vm1d2v.advection import set_num_threads
from vm1d2v.phase_space import make_grid

BOX = ((-8.0, 8.0), (-1.5, 1.5), (-1.5, 1.5))


def baseline_grid(n_x=128, box=BOX):
    """Grid with the baseline aspect: n_x cells in x, n_x / 2 per velocity."""
    return make_grid(box, (n_x, n_x // 2, n_x // 2))


@pytest.fixture
def small_grid():
    return baseline_grid(32)


@pytest.fixture
def grid64():
    return baseline_grid(64)


@pytest.fixture(autouse=True)
def _single_thread():
    set_num_threads(1)
    yield
    set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
