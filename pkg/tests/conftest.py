import numpy as np
import pytest


def central_diff(fn, M, step=1e-6):
    """Independent finite-difference oracle: central differences per entry."""
    M = np.asarray(M, dtype=float)
    g = np.zeros_like(M)
    for i in range(M.shape[0]):
        for j in range(M.shape[1]):
            plus = M.copy()
            plus[i, j] += step
            minus = M.copy()
            minus[i, j] -= step
            g[i, j] = (fn(plus) - fn(minus)) / (2.0 * step)
    return g


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = max(np.linalg.norm(b), 1e-12)
    return np.linalg.norm(a - b) / denom


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
