import numpy as np
import pytest

import h2weak as h


def dense_matrix(kernel, N=None):
    idx = np.arange(kernel.particles.N if N is None else N)
    return kernel.block(idx, idx)


def rel_err(approx, exact):
    return np.linalg.norm(approx - exact) / np.linalg.norm(exact)


@pytest.fixture
def cloud2d():
    return h.uniform_points(600, 2, seed=7)


@pytest.fixture
def cloud3d():
    return h.uniform_points(600, 3, seed=7)
