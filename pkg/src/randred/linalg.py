"""Matrix containers and numerical kernels used throughout the package.

Dense matrices are plain float64 ``numpy.ndarray`` objects and sparse
matrices are SciPy CSC arrays; the constructors below validate the
invariants every other module relies on (finite entries, sorted indices,
no stored zeros).  All kernels are pure: inputs are never mutated and
fresh arrays are returned.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import sparse

from .errors import InvalidInputError, NumericalError
from .rng import derive_seed, generator


def dense_matrix(values) -> np.ndarray:
    """Validate and return a 2-D float64 array with all entries finite."""
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInputError(f"expected a 2-D array, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix contains non-finite entries")
    return a


def sparse_matrix(values, shape=None) -> sparse.csc_array:
    """Validate and return a CSC array.

    Guarantees strictly increasing row indices within each column, no
    explicitly stored zeros, and finite data.
    """
    a = sparse.csc_array(values, shape=shape, dtype=np.float64)
    a.sum_duplicates()
    a.sort_indices()
    a.eliminate_zeros()
    if a.nnz and not np.all(np.isfinite(a.data)):
        raise InvalidInputError("sparse matrix contains non-finite entries")
    return a


def is_sparse(m) -> bool:
    return sparse.issparse(m)


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``M = U @ diag(singular_values) @ V.T`` after rank truncation."""

    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.singular_values.size


def svd_thin(M, rank_tol: float = 1e-10) -> SvdResult:
    """Thin SVD with relative rank truncation.

    Columns whose singular value is at most ``rank_tol * sigma_max`` are
    dropped.  The factorization reconstructs the input to a relative
    Frobenius error of 1e-8 or better for well-scaled matrices.
    """
    A = dense_matrix(M)
    if not 0.0 <= rank_tol < 1.0:
        raise InvalidInputError(f"rank_tol must be in [0, 1), got {rank_tol}")
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    if s.size == 0 or s[0] == 0.0:
        d, n = A.shape
        empty = np.zeros(0)
        return SvdResult(np.zeros((d, 0)), empty, np.zeros((n, 0)))
    keep = s > rank_tol * s[0]
    return SvdResult(U[:, keep].copy(), s[keep].copy(), Vt[keep].T.copy())


class SpectralEstimate(NamedTuple):
    """Largest-singular-value estimate from power iteration."""

    value: float
    converged: bool
    iterations: int


class _MatrixOperator:
    """Adapter giving ndarray / sparse inputs the matvec protocol."""

    def __init__(self, m):
        self._m = m
        self.shape = m.shape

    def matvec(self, v):
        return self._m @ v

    def rmatvec(self, u):
        return self._m.T @ u


def as_operator(m):
    """Wrap a matrix in the (shape, matvec, rmatvec) protocol if needed."""
    if hasattr(m, "matvec") and hasattr(m, "rmatvec"):
        return m
    return _MatrixOperator(m)


def spectral_norm(op, tol: float = 1e-8, max_iter: int = 1000,
                  seed: int = 0, atol: float = 0.0) -> SpectralEstimate:
    """Estimate the spectral norm of a linear operator by power iteration.

    Iterates on the Gram operator ``A.T @ A`` from a seeded random start
    vector, so the result is deterministic for a fixed seed.  Convergence
    is declared when successive estimates agree to a relative ``tol`` (or
    the estimate drops below the absolute floor ``atol``); when
    ``max_iter`` is exhausted first, the best estimate is returned with
    ``converged=False``.
    """
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    A = as_operator(op)
    d, n = A.shape
    if n == 0 or d == 0:
        return SpectralEstimate(0.0, True, 0)
    # Domain-separated stream: a bare integer key here could replay the
    # exact draws that built a sketching operator elsewhere, handing the
    # iteration a start vector inside the operator's range.
    rng = generator(derive_seed(seed, "power-iteration"))
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    sigma_prev = 0.0
    sigma = 0.0
    for it in range(1, max_iter + 1):
        u = A.matvec(v)
        sigma = float(np.linalg.norm(u))
        if sigma == 0.0 or sigma <= atol:
            return SpectralEstimate(sigma, True, it)
        z = A.rmatvec(u)
        nz = float(np.linalg.norm(z))
        if nz == 0.0:
            return SpectralEstimate(sigma, True, it)
        v = z / nz
        if it > 1 and abs(sigma - sigma_prev) <= tol * sigma:
            return SpectralEstimate(sigma, True, it)
        sigma_prev = sigma
    return SpectralEstimate(sigma, False, max_iter)


def fwht(x, normalized: bool = False) -> np.ndarray:
    """Fast Walsh-Hadamard transform along the last axis.

    The length of the last axis must be a power of two.  With
    ``normalized=True`` the transform is orthogonal (applying it twice
    returns the input) and preserves Euclidean norms to roundoff.
    """
    a = np.array(x, dtype=np.float64, copy=True)
    n = a.shape[-1]
    if n == 0 or n & (n - 1) != 0:
        raise InvalidInputError(f"fwht length must be a power of two, got {n}")
    flat = a.reshape(-1, n)
    h = 1
    while h < n:
        blocks = flat.reshape(flat.shape[0], n // (2 * h), 2, h)
        top = blocks[:, :, 0, :] + blocks[:, :, 1, :]
        bot = blocks[:, :, 0, :] - blocks[:, :, 1, :]
        blocks[:, :, 0, :] = top
        blocks[:, :, 1, :] = bot
        h *= 2
    if normalized:
        flat /= math.sqrt(n)
    return a


def gram(Y) -> np.ndarray:
    """Return ``Y.T @ Y`` symmetrized to guard against roundoff skew."""
    if is_sparse(Y):
        K = (Y.T @ Y).toarray()
    else:
        A = dense_matrix(Y)
        K = A.T @ A
    return (K + K.T) / 2.0
