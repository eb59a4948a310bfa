import numpy as np
import pytest

from selfsim.ifs_core import IFS, Similitude
from selfsim.projection_app import carpet


@pytest.fixture
def binary():
    """x/2 and x/2 + 1/2: attractor [0,1], level-n points are the dyadics."""
    return IFS([Similitude(0.5, 0.0), Similitude(0.5, 0.5)])


@pytest.fixture
def cantor():
    """Middle-thirds system with uniform weights."""
    return IFS([Similitude(1.0 / 3.0, 0.0), Similitude(1.0 / 3.0, 2.0 / 3.0)])


@pytest.fixture
def twoscale():
    """Non-homogeneous 1D system used across the disintegration tests."""
    return IFS([Similitude(0.5, 0.0), Similitude(1.0 / 3.0, 0.5)], [0.37, 0.63])


@pytest.fixture
def planar_carpet():
    return carpet()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
