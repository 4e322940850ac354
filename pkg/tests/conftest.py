import numpy as np
import pytest

from nnpde.tuning import tune_allocator

tune_allocator()


def fd_jet(f, x, h=1e-4):
    """Central finite-difference value/gradient/Laplacian oracle at one point."""
    x = np.asarray(x, dtype=float)
    d = x.size
    grad = np.zeros(d)
    lap = 0.0
    f0 = f(x)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        fp, fm = f(x + e), f(x - e)
        grad[i] = (fp - fm) / (2.0 * h)
        lap += (fp - 2.0 * f0 + fm) / h**2
    return f0, grad, lap


def fd_directional(f, theta, v, h=1e-6):
    """Central finite-difference directional derivative of a scalar function."""
    return (f(theta + h * v) - f(theta - h * v)) / (2.0 * h)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
