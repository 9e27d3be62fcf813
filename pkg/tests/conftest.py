import numpy as np
import pytest
from scipy import sparse


@pytest.fixture
def rng():
    return np.random.default_rng(20260811)


def random_sparse(rng, d, n, density=0.05):
    nnz = max(1, int(density * d * n))
    rows = rng.integers(0, d, size=nnz)
    cols = rng.integers(0, n, size=nnz)
    vals = rng.standard_normal(nnz)
    M = sparse.coo_array((vals, (rows, cols)), shape=(d, n)).tocsc()
    M.sum_duplicates()
    return M


def planted_problem(rng, d, n, noise=0.3):
    """Linearly structured binary data: X gaussian, labels from a planted
    direction plus label noise."""
    X = rng.standard_normal((d, n))
    w = rng.standard_normal(d)
    y = np.where(X.T @ w + noise * rng.standard_normal(n) >= 0, 1.0, -1.0)
    return X, y
