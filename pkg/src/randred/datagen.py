"""Synthetic dataset generation, libsvm-format IO, and splitting.

Synthetic data follows a fixed recipe: draw a standard Gaussian matrix,
replace its singular values with a configured decay profile (scaled by
sqrt(n)), label each column by the sign of its inner product with a
random Gaussian direction, then append pure-noise feature rows.  The
first 90% of columns are the training split, the rest the test split;
the split never consumes randomness.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse

from .errors import InvalidInputError, ParseError
from .linalg import is_sparse
from .rng import generator


@dataclass(frozen=True)
class SyntheticConfig:
    d: int
    n: int
    t: int = 10
    decay: str = "exp"   # "exp": sigma_i = exp(-i*tau); "poly": sigma_i = i^-tau
    tau: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.d < 1 or self.n < 1 or self.t < 0:
            raise InvalidInputError("d, n must be >= 1 and t >= 0")
        if self.decay not in ("exp", "poly"):
            raise InvalidInputError(f"decay must be 'exp' or 'poly', got {self.decay!r}")
        if self.tau <= 0:
            raise InvalidInputError("tau must be positive")

    @property
    def name(self) -> str:
        return (f"{self.decay}{self.tau:g}-d{self.d}-n{self.n}"
                f"-t{self.t}-s{self.seed}")


@dataclass
class Dataset:
    X: object                 # (d[+t], n) dense array or CSC
    labels: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    name: str = "dataset"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.X.shape[1]
        if self.labels.shape != (n,):
            raise InvalidInputError("label count must equal the number of columns")
        both = np.concatenate([self.train_idx, self.test_idx])
        if len(np.unique(both)) != n or both.size != n:
            raise InvalidInputError("train/test must partition the columns")

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def dim(self) -> int:
        return self.X.shape[0]

    def train(self):
        X = self.X[:, self.train_idx]
        return X, self.labels[self.train_idx]

    def test(self):
        X = self.X[:, self.test_idx]
        return X, self.labels[self.test_idx]


def split_90_10(n: int):
    """First 90% train, last 10% test; a pure function of n."""
    cut = int(0.9 * n)
    return np.arange(cut), np.arange(cut, n)


def decay_profile(cfg: SyntheticConfig) -> np.ndarray:
    i = np.arange(1, cfg.d + 1, dtype=np.float64)
    if cfg.decay == "exp":
        return np.exp(-i * cfg.tau)
    return i ** (-cfg.tau)


def gen_synthetic(cfg: SyntheticConfig) -> Dataset:
    """Generate a labeled dataset with a controlled singular spectrum.

    The base matrix is ``sqrt(n) * U diag(sigma) V.T`` where U, V come
    from the SVD of a fresh Gaussian matrix and sigma follows the decay
    profile, so the spectrum of the signal block is known exactly.
    Zero-margin labels resolve to +1 and are counted in the metadata.
    """
    rng = generator(cfg.seed)
    M = rng.standard_normal((cfg.d, cfg.n))
    U, _, Vt = np.linalg.svd(M, full_matrices=False)
    sig = decay_profile(cfg)
    Xb = (U * (np.sqrt(cfg.n) * sig)) @ Vt
    w = rng.standard_normal(cfg.d)
    raw = Xb.T @ w
    ties = int(np.count_nonzero(raw == 0.0))
    labels = np.where(raw >= 0.0, 1.0, -1.0)
    if cfg.t > 0:
        noise = rng.standard_normal((cfg.t, cfg.n))
        X = np.vstack([Xb, noise])
    else:
        X = Xb
    train_idx, test_idx = split_90_10(cfg.n)
    meta = {"config": cfg, "sign_ties": ties, "spectrum": np.sqrt(cfg.n) * sig,
            "signal_w": w}
    return Dataset(X=X, labels=labels, train_idx=train_idx, test_idx=test_idx,
                   name=cfg.name, meta=meta)


# ----------------------------------------------------------------- libsvm IO

def load_libsvm(path, n_features: Optional[int] = None) -> Dataset:
    """Read ``label idx:val ...`` lines into a (d, n) CSC dataset.

    Indices are 1-based and must be strictly ascending within a line;
    violations raise :class:`ParseError` with the line number.  Columns
    of the matrix are examples (features transposed), matching the rest
    of the package.
    """
    labels = []
    col_rows = []
    col_vals = []
    max_idx = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                labels.append(float(parts[0]))
            except ValueError:
                raise ParseError(f"unparsable label {parts[0]!r}", lineno)
            rows = []
            vals = []
            prev = 0
            for tok in parts[1:]:
                idx_s, _, val_s = tok.partition(":")
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ParseError(f"unparsable feature token {tok!r}", lineno)
                if idx <= prev:
                    raise ParseError(
                        f"indices must be ascending and >= 1, got {idx} after {prev}",
                        lineno)
                prev = idx
                if val != 0.0:
                    rows.append(idx - 1)
                    vals.append(val)
            max_idx = max(max_idx, prev)
            col_rows.append(rows)
            col_vals.append(vals)
    n = len(labels)
    if n == 0:
        raise ParseError("file contains no examples", None)
    d = n_features if n_features is not None else max_idx
    if d < max_idx:
        raise ParseError(f"n_features={d} smaller than max index {max_idx}", None)
    indptr = np.zeros(n + 1, dtype=np.int64)
    for j, rows in enumerate(col_rows):
        indptr[j + 1] = indptr[j] + len(rows)
    indices = np.concatenate([np.asarray(r, dtype=np.int32) for r in col_rows]) \
        if indptr[-1] else np.zeros(0, dtype=np.int32)
    data = np.concatenate([np.asarray(v) for v in col_vals]) \
        if indptr[-1] else np.zeros(0)
    X = sparse.csc_array((data, indices, indptr), shape=(d, n))
    train_idx, test_idx = split_90_10(n)
    return Dataset(X=X, labels=np.asarray(labels), train_idx=train_idx,
                   test_idx=test_idx, name=str(path),
                   meta={"source": str(path)})


def save_libsvm(X, labels, path) -> None:
    """Write a (d, n) matrix in libsvm text form, one example per line."""
    labels = np.asarray(labels)
    cols = X.tocsc() if is_sparse(X) else None
    with open(path, "w", encoding="utf-8") as fh:
        for j in range(X.shape[1]):
            lab = labels[j]
            lab_s = f"{int(lab)}" if float(lab).is_integer() else repr(float(lab))
            if cols is not None:
                lo, hi = cols.indptr[j], cols.indptr[j + 1]
                pairs = zip(cols.indices[lo:hi], cols.data[lo:hi])
            else:
                col = np.asarray(X[:, j]).ravel()
                nz = np.nonzero(col)[0]
                pairs = zip(nz, col[nz])
            toks = [lab_s] + [f"{i + 1}:{float(v)!r}" for i, v in pairs]
            fh.write(" ".join(toks) + "\n")
