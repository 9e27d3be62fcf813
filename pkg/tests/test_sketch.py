import math

import numpy as np
import pytest

from randred.errors import InvalidConfigError, InvalidInputError
from randred.linalg import fwht
from randred.sketch import (Axis, SketchKind, Variant, apply_features,
                            apply_samples, jl_distortion, make_operator,
                            materialize, operator_config,
                            operator_from_config, selection_operator)

from conftest import random_sparse

KINDS = ("rs", "rg", "srht", "rh")


# -------------------------------------------------------------- construction

def test_rh_single_block_structure():
    op = make_operator(SketchKind(Variant.RH, hash_blocks=1), 10, 4, 7, "feature")
    M = materialize(op)
    for col in M.T:
        nz = np.nonzero(col)[0]
        assert nz.size == 1
        assert col[nz[0]] in (1.0, -1.0)


def test_rh_multi_block_structure():
    s = 3
    op = make_operator(SketchKind(Variant.RH, hash_blocks=s), 50, 12, 3, "sample")
    M = materialize(op)
    rows_per_block = 12 // s
    for col in M.T:
        nz = np.nonzero(col)[0]
        assert nz.size == s
        # one landing spot per block
        assert sorted(nz // rows_per_block) == list(range(s))
        assert np.allclose(np.abs(col[nz]), 1.0 / math.sqrt(s))


def test_rh_block_divisibility():
    with pytest.raises(InvalidConfigError):
        make_operator(SketchKind(Variant.RH, hash_blocks=3), 20, 10, 0, "sample")
    with pytest.raises(InvalidConfigError):
        make_operator(SketchKind(Variant.RH, hash_blocks=5), 20, 4, 0, "sample")


def test_rs_full_draw_is_permutation():
    op = make_operator("rs", 5, 5, 11, "feature")
    assert sorted(op.indices.tolist()) == [0, 1, 2, 3, 4]


def test_rs_without_replacement_bounds():
    with pytest.raises(InvalidConfigError):
        make_operator("rs", 4, 5, 0, "feature")
    op = make_operator(SketchKind(Variant.RS, with_replacement=True), 4, 9, 0, "feature")
    assert op.indices.size == 9


def test_rg_moments():
    op = make_operator("rg", 1000, 50, 123, "feature")
    entries = op.gaussian.ravel()
    assert abs(entries.mean()) <= 3.0 / math.sqrt(entries.size)
    assert abs(entries.var() * 50 - 1.0) <= 0.05


def test_rg_sample_axis_unit_variance():
    op = make_operator("rg", 2000, 40, 5, "sample")
    assert abs(op.gaussian.var() - 1.0) <= 0.05


@pytest.mark.parametrize("tag", KINDS)
def test_construction_deterministic(tag):
    a = make_operator(tag, 64, 8, 99, "sample")
    b = make_operator(tag, 64, 8, 99, "sample")
    assert np.array_equal(materialize(a), materialize(b))
    c = make_operator(tag, 64, 8, 100, "sample")
    assert not np.array_equal(materialize(a), materialize(c))


# ---------------------------------------------------------------- application

def test_selection_applies_row_pick():
    X = np.arange(6.0).reshape(3, 2)
    op = selection_operator([2, 0], 3, "feature")
    assert np.array_equal(apply_features(op, X), X[[2, 0], :])


@pytest.mark.parametrize("tag", KINDS)
def test_zero_matrix_maps_to_zero(tag):
    op = make_operator(tag, 16, 4, 1, "feature")
    out = apply_features(op, np.zeros((16, 5)))
    assert np.array_equal(out, np.zeros((4, 5)))


@pytest.mark.parametrize("tag", KINDS)
def test_apply_features_matches_materialized(tag, rng):
    X = rng.standard_normal((8, 5))
    op = make_operator(tag, 8, 4, 2, "feature")
    assert np.allclose(apply_features(op, X), materialize(op) @ X, atol=1e-12)


@pytest.mark.parametrize("tag", KINDS)
def test_apply_features_sparse_matches_dense(tag, rng):
    Xs = random_sparse(rng, 24, 10, density=0.2)
    op = make_operator(tag, 24, 6, 4, "feature")
    assert np.allclose(apply_features(op, Xs), apply_features(op, Xs.toarray()),
                       atol=1e-12)


def test_apply_samples_column_selection(rng):
    X = rng.standard_normal((4, 7))
    op = selection_operator(np.arange(3), 7, "sample")
    assert np.array_equal(apply_samples(X, op), X[:, :3])
    ident = selection_operator(np.arange(7), 7, "sample")
    assert np.array_equal(apply_samples(X, ident), X)


@pytest.mark.parametrize("tag", KINDS)
def test_apply_samples_matches_materialized(tag, rng):
    Xs = random_sparse(rng, 6, 10, density=0.4)
    op = make_operator(tag, 10, 4, 3, "sample")
    expected = Xs.toarray() @ materialize(op).T
    assert np.allclose(apply_samples(Xs, op), expected, atol=1e-12)
    assert np.allclose(apply_samples(Xs.toarray(), op), expected, atol=1e-12)


@pytest.mark.parametrize("tag", KINDS)
def test_apply_samples_linearity(tag, rng):
    X1 = rng.standard_normal((5, 12))
    X2 = rng.standard_normal((5, 12))
    op = make_operator(tag, 12, 6, 8, "sample")
    lhs = apply_samples(X1 + X2, op)
    rhs = apply_samples(X1, op) + apply_samples(X2, op)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_axis_and_dimension_guards(rng):
    X = rng.standard_normal((8, 5))
    feat = make_operator("rg", 8, 3, 0, "feature")
    samp = make_operator("rg", 5, 3, 0, "sample")
    with pytest.raises(InvalidInputError):
        apply_features(samp, X)
    with pytest.raises(InvalidInputError):
        apply_samples(X, feat)
    with pytest.raises(InvalidInputError):
        apply_features(make_operator("rg", 9, 3, 0, "feature"), X)
    with pytest.raises(InvalidInputError):
        apply_samples(X, make_operator("rg", 6, 3, 0, "sample"))


# ----------------------------------------------------------------------- srht

def test_srht_core_isometry(rng):
    # the sign flip composed with the normalized transform preserves norms
    signs = make_operator("srht", 32, 8, 5, "feature").signs
    x = rng.standard_normal(32)
    mixed = fwht(signs * x, normalized=True)
    assert abs(np.linalg.norm(mixed) - np.linalg.norm(x)) <= 1e-10


def test_srht_pads_to_power_of_two(rng):
    op = make_operator("srht", 12, 5, 9, "feature")
    assert op.padded == 16
    X = rng.standard_normal((12, 3))
    assert np.allclose(apply_features(op, X), materialize(op) @ X, atol=1e-12)


def test_srht_expected_norm_scale(rng):
    # averaged over draws, the map preserves squared norms (unbiased scaling)
    x = rng.standard_normal(64)
    vals = []
    for seed in range(300):
        op = make_operator("srht", 64, 16, seed, "feature")
        vals.append(np.linalg.norm(materialize(op) @ x) ** 2)
    assert np.mean(vals) == pytest.approx(np.linalg.norm(x) ** 2, rel=0.05)


# ----------------------------------------------------------------- distortion

def test_jl_distortion_identity_selection(rng):
    op = selection_operator(np.arange(6), 6, "feature")
    vectors = rng.standard_normal((10, 6))
    res = jl_distortion(op, vectors)
    assert res.skipped == 0
    assert np.max(res.values) <= 1e-14


def test_jl_distortion_skips_zero_vectors(rng):
    op = make_operator("rg", 6, 3, 0, "feature")
    vectors = np.vstack([np.zeros(6), rng.standard_normal(6)])
    res = jl_distortion(op, vectors)
    assert res.skipped == 1
    assert res.values.size == 1


def test_jl_distortion_rs_annihilates_unsampled_coordinate():
    op = make_operator("rs", 8, 3, 21, "feature")
    missing = np.setdiff1d(np.arange(8), op.indices)[0]
    e = np.zeros((1, 8))
    e[0, missing] = 1.0
    res = jl_distortion(op, e)
    assert res.values[0] == pytest.approx(1.0)


def test_jl_distortion_gaussian_envelope():
    m, dim = 256, 128
    op = make_operator("rg", dim, m, 77, "feature")
    vecs = np.random.default_rng(1).standard_normal((400, dim))
    res = jl_distortion(op, vecs)
    envelope = 4.0 * math.sqrt(math.log(100.0) / m)
    assert np.mean(res.values > envelope) <= 0.01


# --------------------------------------------------------------------- config

@pytest.mark.parametrize("tag", KINDS)
def test_config_roundtrip_bit_exact(tag):
    kind = SketchKind(Variant(tag), hash_blocks=2 if tag == "rh" else 1)
    op = make_operator(kind, 20, 6, 1234, "sample")
    text = operator_config(op)
    clone = operator_from_config(text)
    assert clone.kind == op.kind
    assert clone.axis is op.axis
    assert np.array_equal(materialize(clone), materialize(op))


def test_config_rejects_explicit_operators():
    op = selection_operator([0, 1], 4, "feature")
    with pytest.raises(InvalidConfigError):
        operator_config(op)


def test_config_rejects_malformed_text():
    with pytest.raises(InvalidConfigError):
        operator_from_config("kind=rg\nbogus line\n")
    with pytest.raises(InvalidConfigError):
        operator_from_config("kind=rg\nm=4\n")
