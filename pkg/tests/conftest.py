import numpy as np
import pytest

from kirchhoff_lab import build_grid


@pytest.fixture(scope="session")
def line199():
    return build_grid(1, [1.0], [199])


@pytest.fixture(scope="session")
def square63():
    return build_grid(2, [1.0, 1.0], [63, 63])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def discrete_lambda1(grid):
    """Smallest eigenvalue of the 3/5-point Dirichlet Laplacian, in closed form."""
    return sum(4.0 / h**2 * np.sin(np.pi * h / (2.0 * L)) ** 2 for h, L in zip(grid.h, grid.extents))


def torsion_center_series(terms=801):
    """e(1/2, 1/2) on the unit square from the double sine series."""
    k = np.arange(1, 2 * terms, 2, dtype=float)
    m, n = np.meshgrid(k, k, indexing="ij")
    signs = np.sin(m * np.pi / 2) * np.sin(n * np.pi / 2)
    return 16.0 / np.pi**4 * np.sum(signs / (m * n * (m**2 + n**2)))
