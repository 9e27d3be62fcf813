"""Randomized reduction operators.

Four operator families are supported, each a seeded linear map from
``R^in_dim`` to ``R^m``:

* ``rs``   -- uniform coordinate sampling (selection rows, no scaling);
* ``rg``   -- dense Gaussian (entry variance 1/m on the feature axis,
  variance 1 on the sample axis where only the output column space
  matters);
* ``srht`` -- sign flip, fast Walsh-Hadamard mix, uniform subsampling,
  scaled by sqrt(N/m) with N the input padded to the next power of two;
* ``rh``   -- sparse sign hashing: each input coordinate lands in one
  bucket per block with value +-1/sqrt(s), for s blocks.

An operator applies along the feature axis (``xhat = A @ x``) or, as the
transposed map, along the sample axis (``Y = X @ Omega``).  Construction
is bit-reproducible from ``(kind, in_dim, m, seed, axis)``.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy import sparse

from .errors import InvalidConfigError, InvalidInputError
from .linalg import fwht, is_sparse
from .rng import generator


class Variant(Enum):
    RS = "rs"
    RG = "rg"
    SRHT = "srht"
    RH = "rh"


class Axis(Enum):
    FEATURE = "feature"
    SAMPLE = "sample"


@dataclass(frozen=True)
class SketchKind:
    """Operator family plus its per-family parameters."""

    variant: Variant
    hash_blocks: int = 1          # rh only
    with_replacement: bool = False  # rs only

    def __post_init__(self):
        if self.hash_blocks < 1:
            raise InvalidConfigError("hash_blocks must be >= 1")

    @property
    def tag(self) -> str:
        return self.variant.value


def _as_kind(kind) -> SketchKind:
    if isinstance(kind, SketchKind):
        return kind
    if isinstance(kind, Variant):
        return SketchKind(kind)
    if isinstance(kind, str):
        return SketchKind(Variant(kind.lower()))
    raise InvalidConfigError(f"cannot interpret sketch kind {kind!r}")


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


@dataclass
class SketchOperator:
    """A materialized seeded reduction map.

    Treated as immutable after construction.  ``seed < 0`` marks an
    operator built from explicit state (see :func:`selection_operator`)
    that cannot be reconstructed from a config record.
    """

    kind: SketchKind
    in_dim: int
    m: int
    seed: int
    axis: Axis
    # materialized state; which fields are set depends on the variant
    indices: Optional[np.ndarray] = None      # rs and srht subsampling
    signs: Optional[np.ndarray] = None        # srht diagonal, length padded
    padded: int = 0                           # srht padded input length
    gaussian: Optional[np.ndarray] = None     # rg dense (m, in_dim)
    hash_matrix: Optional[sparse.csr_array] = field(default=None, repr=False)

    @property
    def out_dim(self) -> int:
        return self.m


def make_operator(kind, in_dim: int, m: int, seed: int, axis) -> SketchOperator:
    """Construct an operator; identical arguments give identical state."""
    kind = _as_kind(kind)
    axis = Axis(axis) if not isinstance(axis, Axis) else axis
    if in_dim < 1 or m < 1:
        raise InvalidConfigError(f"dimensions must be positive, got in_dim={in_dim}, m={m}")
    rng = generator(seed)
    v = kind.variant
    if v is Variant.RS:
        if kind.with_replacement:
            idx = rng.integers(0, in_dim, size=m)
        else:
            if m > in_dim:
                raise InvalidConfigError(
                    f"sampling without replacement needs m <= in_dim ({m} > {in_dim})")
            idx = rng.permutation(in_dim)[:m]
        return SketchOperator(kind, in_dim, m, seed, axis, indices=idx.astype(np.int64))
    if v is Variant.RG:
        g = rng.standard_normal((m, in_dim))
        if axis is Axis.FEATURE:
            g /= math.sqrt(m)
        return SketchOperator(kind, in_dim, m, seed, axis, gaussian=g)
    if v is Variant.SRHT:
        padded = _next_pow2(in_dim)
        if m > padded:
            raise InvalidConfigError(f"srht needs m <= padded length ({m} > {padded})")
        signs = rng.integers(0, 2, size=padded).astype(np.float64) * 2.0 - 1.0
        idx = rng.permutation(padded)[:m]
        return SketchOperator(kind, in_dim, m, seed, axis,
                              indices=idx.astype(np.int64), signs=signs, padded=padded)
    if v is Variant.RH:
        s = kind.hash_blocks
        if m < s:
            raise InvalidConfigError(f"rh needs m >= hash_blocks ({m} < {s})")
        if m % s != 0:
            raise InvalidConfigError(f"hash_blocks must divide m ({s} does not divide {m})")
        rows_per_block = m // s
        cols = np.tile(np.arange(in_dim, dtype=np.int64), s)
        rows = np.empty(s * in_dim, dtype=np.int64)
        vals = np.empty(s * in_dim, dtype=np.float64)
        scale = 1.0 / math.sqrt(s)
        for k in range(s):
            h = rng.integers(0, rows_per_block, size=in_dim)
            sg = rng.integers(0, 2, size=in_dim).astype(np.float64) * 2.0 - 1.0
            rows[k * in_dim:(k + 1) * in_dim] = k * rows_per_block + h
            vals[k * in_dim:(k + 1) * in_dim] = sg * scale
        mat = sparse.csr_array((vals, (rows, cols)), shape=(m, in_dim))
        return SketchOperator(kind, in_dim, m, seed, axis, hash_matrix=mat)
    raise InvalidConfigError(f"unknown variant {v}")


def selection_operator(indices, in_dim: int, axis) -> SketchOperator:
    """Explicit coordinate-selection operator (rs semantics, fixed indices)."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1 or idx.size < 1:
        raise InvalidConfigError("indices must be a non-empty 1-D sequence")
    if idx.min() < 0 or idx.max() >= in_dim:
        raise InvalidConfigError("selection indices out of range")
    axis = Axis(axis) if not isinstance(axis, Axis) else axis
    return SketchOperator(SketchKind(Variant.RS), in_dim, idx.size, -1, axis,
                          indices=idx)


# ---------------------------------------------------------------- application

_SRHT_BLOCK = 256


def _srht_batch(op: SketchOperator, V: np.ndarray) -> np.ndarray:
    """Apply the srht map to the columns of a dense (in_dim, B) block."""
    n, b = V.shape
    out = np.empty((op.m, b))
    scale = math.sqrt(op.padded / op.m)
    for lo in range(0, b, _SRHT_BLOCK):
        hi = min(lo + _SRHT_BLOCK, b)
        work = np.zeros((hi - lo, op.padded))
        work[:, :n] = V[:, lo:hi].T
        work *= op.signs
        mixed = fwht(work, normalized=True)
        out[:, lo:hi] = mixed[:, op.indices].T * scale
    return out


def _apply_columns(op: SketchOperator, X) -> np.ndarray:
    """Apply the map to every column of X (dense or CSC), densifying only
    the (m x n) result and, for srht, one column block at a time."""
    v = op.kind.variant
    if v is Variant.RS:
        if is_sparse(X):
            return X.tocsr()[op.indices, :].toarray()
        return np.asarray(X)[op.indices, :].copy()
    if v is Variant.RG:
        out = op.gaussian @ X
        return np.asarray(out)
    if v is Variant.RH:
        out = op.hash_matrix @ X
        if is_sparse(out):
            out = out.toarray()
        return np.asarray(out)
    if v is Variant.SRHT:
        if is_sparse(X):
            n_cols = X.shape[1]
            out = np.empty((op.m, n_cols))
            for lo in range(0, n_cols, _SRHT_BLOCK):
                hi = min(lo + _SRHT_BLOCK, n_cols)
                out[:, lo:hi] = _srht_batch(op, X[:, lo:hi].toarray())
            return out
        return _srht_batch(op, np.asarray(X, dtype=np.float64))
    raise InvalidConfigError(f"unknown variant {v}")


def apply_features(op: SketchOperator, X) -> np.ndarray:
    """Reduce the feature axis: column i of the result is ``op`` applied
    to column i of X.  Returns a dense (m, n) array."""
    if op.axis is not Axis.FEATURE:
        raise InvalidInputError("operator was built for the sample axis")
    if X.shape[0] != op.in_dim:
        raise InvalidInputError(
            f"operator expects {op.in_dim} features, data has {X.shape[0]}")
    return _apply_columns(op, X)


def apply_samples(X, op: SketchOperator) -> np.ndarray:
    """Sketch the sample axis: ``Y = X @ Omega`` with Omega the transposed
    map.  Returns a dense (d, m) array; sparse X is never densified."""
    if op.axis is not Axis.SAMPLE:
        raise InvalidInputError("operator was built for the feature axis")
    if X.shape[1] != op.in_dim:
        raise InvalidInputError(
            f"operator expects {op.in_dim} samples, data has {X.shape[1]}")
    v = op.kind.variant
    if v is Variant.RS:
        if is_sparse(X):
            return X[:, op.indices].toarray()
        return np.asarray(X)[:, op.indices].copy()
    if v is Variant.RG:
        return np.asarray(X @ op.gaussian.T)
    if v is Variant.RH:
        out = X @ op.hash_matrix.T
        if is_sparse(out):
            out = out.toarray()
        return np.asarray(out)
    if v is Variant.SRHT:
        d = X.shape[0]
        out = np.empty((d, op.m))
        if is_sparse(X):
            Xr = X.tocsr()
            for lo in range(0, d, _SRHT_BLOCK):
                hi = min(lo + _SRHT_BLOCK, d)
                block = Xr[lo:hi, :].toarray()
                out[lo:hi, :] = _srht_batch(op, block.T).T
        else:
            A = np.asarray(X, dtype=np.float64)
            out[:, :] = _srht_batch(op, A.T).T
        return out
    raise InvalidConfigError(f"unknown variant {v}")


def materialize(op: SketchOperator) -> np.ndarray:
    """Explicit (m, in_dim) matrix of the map; intended for small dims."""
    v = op.kind.variant
    if v is Variant.RS:
        M = np.zeros((op.m, op.in_dim))
        M[np.arange(op.m), op.indices] = 1.0
        return M
    if v is Variant.RG:
        return op.gaussian.copy()
    if v is Variant.RH:
        return op.hash_matrix.toarray()
    if v is Variant.SRHT:
        return _srht_batch(op, np.eye(op.in_dim))
    raise InvalidConfigError(f"unknown variant {v}")


# ---------------------------------------------------------------- distortion

@dataclass(frozen=True)
class DistortionResult:
    """Per-vector relative norm distortions plus the skipped-vector count."""

    values: np.ndarray
    skipped: int


def jl_distortion(op: SketchOperator, vectors) -> DistortionResult:
    """Relative squared-norm distortion ``| ||Ax||^2 - ||x||^2 | / ||x||^2``
    for each vector.  Zero vectors are skipped and counted."""
    if op.axis is not Axis.FEATURE:
        raise InvalidInputError("distortion is defined for feature-axis operators")
    V = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if V.shape[1] != op.in_dim:
        raise InvalidInputError(
            f"vectors have dimension {V.shape[1]}, operator expects {op.in_dim}")
    norms2 = np.einsum("ij,ij->i", V, V)
    keep = norms2 > 0.0
    skipped = int(np.count_nonzero(~keep))
    kept = V[keep]
    if kept.shape[0] == 0:
        return DistortionResult(np.zeros(0), skipped)
    mapped = _apply_columns(op, kept.T)
    mapped2 = np.einsum("ij,ij->j", mapped, mapped)
    vals = np.abs(mapped2 - norms2[keep]) / norms2[keep]
    return DistortionResult(vals, skipped)


# ---------------------------------------------------------------- config text

def operator_config(op: SketchOperator) -> str:
    """Key-value text record sufficient to rebuild the operator."""
    if op.seed < 0:
        raise InvalidConfigError("explicit-state operators have no config form")
    lines = [
        f"kind={op.kind.tag}",
        f"in_dim={op.in_dim}",
        f"m={op.m}",
        f"s={op.kind.hash_blocks}",
        f"with_replacement={str(op.kind.with_replacement).lower()}",
        f"seed={op.seed}",
        f"axis={op.axis.value}",
    ]
    return "\n".join(lines) + "\n"


def operator_from_config(text: str) -> SketchOperator:
    """Rebuild an operator from :func:`operator_config` output (bit-exact)."""
    fields = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidConfigError(f"malformed config line: {line!r}")
        key, _, val = line.partition("=")
        fields[key.strip()] = val.strip()
    try:
        kind = SketchKind(
            Variant(fields["kind"]),
            hash_blocks=int(fields.get("s", "1")),
            with_replacement=fields.get("with_replacement", "false") == "true",
        )
        return make_operator(kind, int(fields["in_dim"]), int(fields["m"]),
                             int(fields["seed"]), Axis(fields["axis"]))
    except KeyError as exc:
        raise InvalidConfigError(f"config missing field {exc}") from exc
