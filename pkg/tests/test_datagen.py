import numpy as np
import pytest

from randred.datagen import (Dataset, SyntheticConfig, gen_synthetic,
                             load_libsvm, save_libsvm, split_90_10)
from randred.errors import InvalidInputError, ParseError
from randred.linalg import svd_thin

import oracles


# ------------------------------------------------------------------ synthetic

def test_exp_decay_effective_rank():
    ds = gen_synthetic(SyntheticConfig(d=200, n=400, t=0, decay="exp",
                                       tau=1.0, seed=0))
    sig = svd_thin(ds.X, rank_tol=1e-8).singular_values
    assert sig.size <= 20


def test_noiseless_data_is_separable():
    cfg = SyntheticConfig(d=40, n=300, t=0, decay="poly", tau=0.5, seed=4)
    ds = gen_synthetic(cfg)
    w = ds.meta["signal_w"]
    margins = ds.labels * (ds.X.T @ w)
    assert np.all(margins >= 0.0)


def test_spectrum_matches_configured_decay():
    cfg = SyntheticConfig(d=50, n=400, t=0, decay="poly", tau=0.5, seed=9)
    ds = gen_synthetic(cfg)
    got = svd_thin(ds.X).singular_values
    want = ds.meta["spectrum"]
    assert got.size == 50
    assert np.max(np.abs(got - want)) <= 1e-8 * want[0]


def test_generation_reproducible():
    cfg = SyntheticConfig(d=30, n=200, t=5, decay="exp", tau=1.0, seed=123)
    a = gen_synthetic(cfg)
    b = gen_synthetic(cfg)
    assert np.array_equal(a.X, b.X)
    assert np.array_equal(a.labels, b.labels)


def test_noise_rows_uncorrelated_with_labels():
    cfg = SyntheticConfig(d=60, n=2000, t=10, decay="exp", tau=1.0, seed=2)
    ds = gen_synthetic(cfg)
    noise = ds.X[60:, :]
    y = ds.labels
    for row in noise:
        corr = np.corrcoef(row, y)[0, 1]
        assert abs(corr) < 3.0 / np.sqrt(cfg.n)


def test_split_is_pure_function_of_n():
    tr, te = split_90_10(100)
    assert tr.size == 90 and te.size == 10
    assert tr[0] == 0 and te[-1] == 99
    ds = gen_synthetic(SyntheticConfig(d=10, n=55, t=0, seed=1))
    assert ds.train_idx.size + ds.test_idx.size == 55
    assert np.intersect1d(ds.train_idx, ds.test_idx).size == 0


def test_config_validation():
    with pytest.raises(InvalidInputError):
        SyntheticConfig(d=0, n=10)
    with pytest.raises(InvalidInputError):
        SyntheticConfig(d=10, n=10, decay="linear")
    with pytest.raises(InvalidInputError):
        SyntheticConfig(d=10, n=10, tau=0.0)


def test_dataset_partition_validation(rng):
    X = rng.standard_normal((3, 10))
    with pytest.raises(InvalidInputError):
        Dataset(X=X, labels=np.ones(10), train_idx=np.arange(5),
                test_idx=np.arange(4, 10))


# --------------------------------------------------------------------- libsvm

def test_load_single_line(tmp_path):
    p = tmp_path / "one.svm"
    p.write_text("+1 1:0.5 3:2.0\n")
    ds = load_libsvm(p)
    col = ds.X[:, [0]].toarray().ravel()
    assert ds.X.shape == (3, 1)
    assert col[0] == 0.5 and col[1] == 0.0 and col[2] == 2.0
    assert ds.labels[0] == 1.0


def test_load_empty_file_errors(tmp_path):
    p = tmp_path / "empty.svm"
    p.write_text("")
    with pytest.raises(ParseError):
        load_libsvm(p)


def test_load_reports_line_numbers(tmp_path):
    p = tmp_path / "bad.svm"
    p.write_text("+1 1:0.5\n-1 2:oops\n")
    with pytest.raises(ParseError) as err:
        load_libsvm(p)
    assert err.value.line == 2
    p2 = tmp_path / "nonmono.svm"
    p2.write_text("+1 3:1.0 2:2.0\n")
    with pytest.raises(ParseError) as err:
        load_libsvm(p2)
    assert err.value.line == 1


def test_load_matches_naive_parser(tmp_path, rng):
    lines = []
    for i in range(100):
        label = int(rng.choice([-1, 1]))
        nnz = int(rng.integers(0, 6))
        idx = np.sort(rng.choice(np.arange(1, 30), size=nnz, replace=False))
        toks = [str(label)] + [f"{j}:{rng.standard_normal():.6f}" for j in idx]
        lines.append(" ".join(toks))
    p = tmp_path / "fixture.svm"
    p.write_text("\n".join(lines) + "\n")
    ds = load_libsvm(p)
    labels, columns = oracles.parse_libsvm_naive(p)
    assert ds.X.nnz == sum(len(c) for c in columns)
    assert np.array_equal(ds.labels, np.asarray(labels))
    dense = ds.X.toarray()
    for j, col in enumerate(columns):
        assert np.isclose(dense[:, j].sum(), sum(col.values()), atol=1e-12)
        for r, v in col.items():
            assert dense[r, j] == v


def test_save_load_roundtrip(tmp_path, rng):
    X = rng.standard_normal((6, 20))
    X[np.abs(X) < 0.7] = 0.0
    y = np.where(rng.standard_normal(20) >= 0, 1.0, -1.0)
    p = tmp_path / "round.svm"
    save_libsvm(X, y, p)
    ds = load_libsvm(p, n_features=6)
    assert np.array_equal(ds.labels, y)
    assert np.array_equal(ds.X.toarray(), X)


def test_load_respects_explicit_feature_count(tmp_path):
    p = tmp_path / "dims.svm"
    p.write_text("+1 2:1.0\n-1 1:3.0\n")
    assert load_libsvm(p).X.shape == (2, 2)
    assert load_libsvm(p, n_features=7).X.shape == (7, 2)
    with pytest.raises(ParseError):
        load_libsvm(p, n_features=1)
