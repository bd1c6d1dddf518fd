import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rglgmres import (
    ParameterError,
    RankError,
    ShapeError,
    apply_sketch,
    estimate_epsilon,
    frob_inner,
    frob_norm,
    make_sketch,
    sketched_inner,
)


def test_identity_apply_is_exact():
    X = np.random.default_rng(0).standard_normal((30, 3))
    theta = make_sketch("identity", None, 30)
    np.testing.assert_array_equal(apply_sketch(theta, X), X)
    assert theta.ell == 30


def test_zero_block_maps_to_zero():
    theta = make_sketch("gaussian", 16, 40, seed=1)
    out = apply_sketch(theta, np.zeros((40, 2)))
    assert out.shape == (16, 2) and not out.any()


def test_sparse_sign_pattern():
    theta = make_sketch("sparse-sign", 8, 100, seed=5, zeta=4)
    D = theta.dense()
    assert D.shape == (8, 100)
    nnz = (D != 0).sum(axis=0)
    assert (nnz == 4).all()
    np.testing.assert_array_equal(np.abs(D[D != 0]), 0.5)


def test_sparse_sign_zeta_capped_by_ell():
    theta = make_sketch("sparsesign", 3, 20, zeta=8)
    assert theta.kind == "sparse-sign"
    D = theta.dense()
    assert ((D != 0).sum(axis=0) == 3).all()
    np.testing.assert_allclose(np.abs(D[D != 0]), 1 / np.sqrt(3))


def test_gaussian_variance_and_dense_consistency():
    theta = make_sketch("gaussian", 200, 300, seed=9)
    D = theta.dense()
    assert D.var() * 200 == pytest.approx(1.0, rel=0.02)
    X = np.random.default_rng(1).standard_normal((300, 2))
    np.testing.assert_allclose(theta.apply(X), D @ X, rtol=1e-12, atol=1e-12)


def test_gaussian_streaming_matches_cached():
    X = np.random.default_rng(2).standard_normal((5000, 2))
    cached = make_sketch("gaussian", 12, 5000, seed=4)
    streamed = make_sketch("gaussian", 12, 5000, seed=4, memory_budget=0)
    np.testing.assert_array_equal(cached.apply(X), streamed.apply(X))
    assert not streamed._cache


def test_monte_carlo_norm_preservation():
    rng = np.random.default_rng(11)
    x = rng.standard_normal(50)
    x /= np.linalg.norm(x)
    sq = [np.sum(make_sketch("gaussian", 200, 50, seed=seed).apply(x) ** 2) for seed in range(2000)]
    assert abs(np.mean(sq) - 1.0) <= 0.05


def test_linearity():
    rng = np.random.default_rng(3)
    theta = make_sketch("gaussian", 64, 256, seed=2)
    X, Y = rng.standard_normal((256, 3)), rng.standard_normal((256, 3))
    a, b = 1.7, -0.4
    lhs = apply_sketch(theta, a * X + b * Y)
    rhs = a * apply_sketch(theta, X) + b * apply_sketch(theta, Y)
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(lhs).max())


@pytest.mark.parametrize("kind,ell", [("gaussian", 20), ("sparse-sign", 20), ("identity", 60)])
def test_determinism(kind, ell):
    X = np.random.default_rng(4).standard_normal((60, 2))
    a = make_sketch(kind, ell, 60, seed=123).apply(X)
    b = make_sketch(kind, ell, 60, seed=123).apply(X)
    np.testing.assert_array_equal(a, b)
    if kind != "identity":
        c = make_sketch(kind, ell, 60, seed=124).apply(X)
        assert not np.array_equal(a, c)


def test_column_order_independence():
    # columns are sketched independently, so a permuted block gives permuted output
    theta = make_sketch("sparse-sign", 16, 80, seed=7)
    X = np.random.default_rng(5).standard_normal((80, 4))
    perm = [2, 0, 3, 1]
    np.testing.assert_array_equal(theta.apply(X)[:, perm], theta.apply(X[:, perm]))


def test_parameter_validation():
    with pytest.raises(ParameterError):
        make_sketch("gaussian", 0, 10)
    with pytest.raises(ParameterError):
        make_sketch("sparse-sign", 11, 10)
    with pytest.raises(ParameterError):
        make_sketch("identity", 5, 10)
    with pytest.raises(ParameterError):
        make_sketch("hadamard", 5, 10)
    with pytest.raises(ParameterError):
        make_sketch("sparse-sign", 5, 10, zeta=0)
    with pytest.raises(ParameterError):
        make_sketch("gaussian", 5, 10, seed=-1)
    with pytest.raises(ShapeError):
        make_sketch("gaussian", 5, 10).apply(np.ones((9, 1)))


def test_sketched_inner():
    rng = np.random.default_rng(6)
    X, Y = rng.standard_normal((40, 3)), rng.standard_normal((40, 3))
    ident = make_sketch("identity", None, 40)
    assert sketched_inner(ident, X, Y) == frob_inner(X, Y)
    theta = make_sketch("gaussian", 25, 40, seed=1)
    assert sketched_inner(theta, X, np.zeros_like(Y)) == 0.0
    two_step = frob_inner(theta.apply(X), theta.apply(Y))
    scale = frob_norm(theta.apply(X)) * frob_norm(theta.apply(Y))
    assert abs(sketched_inner(theta, X, Y) - two_step) <= 1e-13 * scale
    with pytest.raises(ShapeError):
        sketched_inner(theta, X, Y[:, :2])


def test_estimate_epsilon_identity_is_zero():
    V = np.random.default_rng(7).standard_normal((50, 5))
    rep = estimate_epsilon(make_sketch("identity", None, 50), V)
    assert rep.epsilon <= 1e-12
    assert rep.dimension == 5


def test_estimate_epsilon_single_column():
    v = np.random.default_rng(8).standard_normal(60)
    v /= np.linalg.norm(v)
    theta = make_sketch("gaussian", 60, 60, seed=3)
    rep = estimate_epsilon(theta, v)
    assert rep.epsilon == pytest.approx(abs(np.sum(theta.apply(v) ** 2) - 1), abs=1e-12)


def test_estimate_epsilon_rank_deficient():
    V = np.random.default_rng(9).standard_normal((40, 3))
    V = np.hstack([V, V[:, :1] + V[:, 1:2]])
    with pytest.raises(RankError):
        estimate_epsilon(make_sketch("gaussian", 30, 40), V)


@pytest.mark.parametrize("seed", range(3))
def test_estimate_epsilon_dominates_brute_force_distortion(seed):
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((200, 5))
    theta = make_sketch("gaussian", 60, 200, seed=seed)
    eps = estimate_epsilon(theta, V).epsilon
    C1, C2 = rng.standard_normal((5, 10_000)), rng.standard_normal((5, 10_000))
    X, Y = V @ C1, V @ C2
    SX, SY = theta.apply(X), theta.apply(Y)
    dist = np.abs(np.sum(X * Y, axis=0) - np.sum(SX * SY, axis=0))
    scale = np.linalg.norm(X, axis=0) * np.linalg.norm(Y, axis=0)
    assert (dist / scale).max() <= eps + 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 3), st.integers(1, 3))
def test_frobenius_extension_and_sandwich(seed, s, d):
    rng = np.random.default_rng(seed)
    n = 120
    V = rng.standard_normal((n, d))
    theta = make_sketch("gaussian", 80, n, seed=seed)
    X, Y = V @ rng.standard_normal((d, s)), V @ rng.standard_normal((d, s))
    eps = estimate_epsilon(theta, V).epsilon
    gap = abs(frob_inner(X, Y) - sketched_inner(theta, X, Y))
    assert gap <= eps * frob_norm(X) * frob_norm(Y) + 1e-10
    nx2, sx2 = frob_norm(X) ** 2, frob_norm(theta.apply(X)) ** 2
    assert (1 - eps) * nx2 - 1e-10 * nx2 <= sx2 <= (1 + eps) * nx2 + 1e-10 * nx2
