import time

import numpy as np
import pytest

from harmonicseg import build_basis_matrix, fibonacci_lattice, repulsion_optimize


def rasterize_ball(dims, center, radius):
    grids = np.meshgrid(*(np.arange(d) for d in dims), indexing="ij")
    dist2 = sum((g - c) ** 2 for g, c in zip(grids, center))
    return dist2 <= radius**2


def rasterize_ellipsoid(dims, center, semi_axes):
    grids = np.meshgrid(*(np.arange(d) for d in dims), indexing="ij")
    q = sum(((g - c) / a) ** 2 for g, c, a in zip(grids, center, semi_axes))
    return q <= 1.0


@pytest.fixture(scope="session")
def fib5000():
    return fibonacci_lattice(5000)


@pytest.fixture(scope="session")
def repulsion5000(fib5000):
    t0 = time.perf_counter()
    optimized = repulsion_optimize(fib5000, max_iters=15)
    elapsed = time.perf_counter() - t0
    return optimized, elapsed


@pytest.fixture(scope="session")
def basis5000(fib5000):
    return build_basis_matrix(fib5000, 5)


@pytest.fixture(scope="session")
def ball64():
    """Rasterized ball of radius 20 centered in a 64^3 label volume."""
    mask = rasterize_ball((64, 64, 64), (31.5, 31.5, 31.5), 20.0)
    return mask.astype(np.uint16)
