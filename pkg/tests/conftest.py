import numpy as np
import pytest

from kmsw._rng import substream
from kmsw.kernels import PointCloud, assemble, gaussian


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


def gaussian_instance(n: int, d: int = 3, seed: int = 0, shift: float = 0.3):
    """A generic assembled instance: two gaussian clouds, unit-bandwidth kernel."""
    r = substream(seed, "datagen")
    x = PointCloud(r.standard_normal((n, d)))
    y = PointCloud(r.standard_normal((n, d)) + shift)
    return assemble(gaussian(1.0), x, y)


@pytest.fixture
def small_assembly():
    return gaussian_instance(4, seed=11)
