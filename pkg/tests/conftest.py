import numpy as np
import pytest

from mstsvd.synthetic import make_color_image, make_msi_cube, make_piecewise_constant


@pytest.fixture
def rng():
    return np.random.default_rng(20240801)


@pytest.fixture(scope="session")
def color_image():
    return make_color_image(64, seed=3)


@pytest.fixture(scope="session")
def blocks_image():
    return make_piecewise_constant(64, seed=7)


@pytest.fixture(scope="session")
def msi_cube():
    return make_msi_cube(48, 48, 31, seed=2)


def rel_err(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    denom = max(np.linalg.norm(b.ravel()), 1e-300)
    return np.linalg.norm((a - b).ravel()) / denom
