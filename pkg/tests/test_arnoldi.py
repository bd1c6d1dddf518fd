import numpy as np
import pytest
import scipy.sparse as sp
from conftest import arnoldi_defect, random_problem, vec_gram

from rglgmres import (
    DegenerateInputError,
    GlobalArnoldi,
    HessenbergFactor,
    ParameterError,
    ResourceError,
    SemiNormDegeneracyError,
    ShapeError,
    gl_arnoldi,
    make_sketch,
    rgl_arnoldi,
)


def dense_mgs_arnoldi(A, r0, k):
    """Textbook Arnoldi on vectors, the oracle for the s=1 case."""
    n = len(r0)
    V = np.zeros((n, k + 1))
    H = np.zeros((k + 1, k))
    V[:, 0] = r0 / np.linalg.norm(r0)
    for j in range(k):
        w = A @ V[:, j]
        for i in range(j + 1):
            H[i, j] = w @ V[:, i]
            w = w - H[i, j] * V[:, i]
        H[j + 1, j] = np.linalg.norm(w)
        V[:, j + 1] = w / H[j + 1, j]
    return V, H


def test_diag_two_by_two_hand_example(backend):
    A = sp.diags([1.0, 2.0]).tocsr()
    res = gl_arnoldi(A, np.array([[1.0], [1.0]]), 1)
    V1, V2 = res.basis.blocks
    np.testing.assert_allclose(V1[:, 0], [1 / np.sqrt(2), 1 / np.sqrt(2)], rtol=1e-15)
    H = res.hess.entries
    assert H[0, 0] == pytest.approx(1.5, rel=1e-15)
    assert H[1, 0] == pytest.approx(0.5, rel=1e-15)
    np.testing.assert_allclose(V2[:, 0], [-1 / np.sqrt(2), 1 / np.sqrt(2)], rtol=1e-14)
    Vo, Ho = dense_mgs_arnoldi(A.toarray(), np.ones(2), 1)
    np.testing.assert_allclose(H, Ho, rtol=1e-14)


def test_s1_matches_dense_vector_arnoldi(backend):
    A, R = random_problem(60, 1, seed=3)
    res = gl_arnoldi(A, R, 8)
    Vo, Ho = dense_mgs_arnoldi(A.toarray(), R[:, 0], 8)
    np.testing.assert_allclose(res.hess.entries, Ho, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(res.basis.stacked(), Vo, atol=1e-10)


@pytest.mark.parametrize("k", [1, 3])
def test_identity_matrix_breaks_down_at_first_step(k):
    A = sp.identity(10, format="csr")
    R = np.random.default_rng(0).standard_normal((10, 2))
    for res in (gl_arnoldi(A, R, k), rgl_arnoldi(A, R, k, make_sketch("gaussian", 8, 10, seed=1))):
        assert res.breakdown and res.breakdown_step == 1
        assert len(res.basis) == 1
        assert res.hess.entries.shape == (2, 1)
        assert res.hess.entries[0, 0] == pytest.approx(1.0, rel=1e-14)


def test_gl_orthogonality_and_arnoldi_identity(backend):
    A, R = random_problem(100, 4, seed=1)
    res = gl_arnoldi(A, R, 10)
    assert len(res.basis) == 11 and res.hess.k == 10
    G = vec_gram(res.basis.blocks)
    assert np.abs(G - np.eye(11)).max() <= 1e-10
    assert arnoldi_defect(A, res.basis.blocks, res.hess.entries) <= 1e-10
    np.testing.assert_allclose(res.basis[0], R / np.linalg.norm(R), rtol=1e-14)
    assert res.beta == pytest.approx(np.linalg.norm(R), rel=1e-14)


def test_rgl_orthogonality_and_sketch_consistency(backend):
    A, R = random_problem(300, 3, seed=2, density=0.02)
    theta = make_sketch("gaussian", 120, 300, seed=5)
    res = rgl_arnoldi(A, R, 15, theta)
    G = vec_gram(res.basis.blocks, theta.dense())
    assert np.abs(G - np.eye(16)).max() <= 1e-8
    for Q, S in zip(res.basis.blocks, res.basis.sketched):
        assert np.linalg.norm(S - theta.apply(Q)) <= 1e-10 * max(np.linalg.norm(S), 1.0)
    assert arnoldi_defect(A, res.basis.blocks, res.hess.entries) <= 1e-10
    assert res.beta == pytest.approx(np.linalg.norm(theta.apply(R)), rel=1e-14)
    np.testing.assert_allclose(res.basis[0], R / res.beta, rtol=1e-14)


def test_identity_sketch_is_bitwise_gl():
    A, R = random_problem(80, 2, seed=4)
    a = gl_arnoldi(A, R, 12)
    b = rgl_arnoldi(A, R, 12, make_sketch("identity", None, 80))
    np.testing.assert_array_equal(a.hess.entries, b.hess.entries)
    for Va, Vb in zip(a.basis.blocks, b.basis.blocks):
        np.testing.assert_array_equal(Va, Vb)
    assert a.beta == b.beta


def test_hessenberg_structure():
    A, R = random_problem(50, 2, seed=5)
    H = gl_arnoldi(A, R, 9).hess.entries
    assert not np.tril(H, -2).any()
    assert (np.diag(H, -1) >= 0).all()
    with pytest.raises(ShapeError):
        HessenbergFactor(np.zeros((3, 3)))
    with pytest.raises(ParameterError):
        HessenbergFactor(np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]))


@pytest.mark.parametrize("sketched", [False, True])
def test_span_property(sketched):
    A, R = random_problem(120, 2, seed=6)
    k = 6
    if sketched:
        res = rgl_arnoldi(A, R, k, make_sketch("sparse-sign", 60, 120, seed=2))
    else:
        res = gl_arnoldi(A, R, k)
    Ad = A.toarray()
    powers = [R]
    for _ in range(k):
        powers.append(Ad @ powers[-1])
    for j, V in enumerate(res.basis.blocks):
        # V_{j+1} lies in span{R, AR, ..., A^j R} with scalar coefficients
        M = np.column_stack([(P / np.linalg.norm(P)).ravel(order="F") for P in powers[: j + 1]])
        c, *_ = np.linalg.lstsq(M, V.ravel(order="F"), rcond=None)
        assert np.linalg.norm(M @ c - V.ravel(order="F")) <= 1e-8 * np.linalg.norm(V)


@pytest.mark.parametrize("c", [1e-3, 7.0, 2.0**20])
def test_scaling_invariance(c):
    A, R = random_problem(90, 3, seed=7)
    theta = make_sketch("gaussian", 50, 90, seed=8)
    for run in (lambda X: gl_arnoldi(A, X, 7), lambda X: rgl_arnoldi(A, X, 7, theta)):
        a, b = run(R), run(c * R)
        np.testing.assert_allclose(b.hess.entries, a.hess.entries, rtol=1e-12, atol=1e-12)
        for Va, Vb in zip(a.basis.blocks, b.basis.blocks):
            np.testing.assert_allclose(Vb, Va, rtol=1e-12, atol=1e-12)
        assert b.beta == pytest.approx(c * a.beta, rel=1e-12)


def test_singular_value_sandwich_for_sketched_basis():
    A, R = random_problem(400, 2, seed=9, density=0.02)
    theta = make_sketch("gaussian", 200, 400, seed=10)
    res = rgl_arnoldi(A, R, 8, theta)
    V = np.column_stack([Q.ravel(order="F") for Q in res.basis.blocks])
    # the vectorized basis lives in R^{ns}; blockwise sketching acts as I_s (x) Theta
    big = np.kron(np.eye(2), theta.dense())
    Q, _ = np.linalg.qr(V)
    sv_q = np.linalg.svd(big @ Q, compute_uv=False)
    eps = max(sv_q[0] ** 2 - 1, 1 - sv_q[-1] ** 2)
    assert eps < 1
    sv_v = np.linalg.svd(V, compute_uv=False)
    sv_s = np.linalg.svd(big @ V, compute_uv=False)
    assert (1 + eps) ** -0.5 * sv_s[-1] <= sv_v[-1] * (1 + 1e-10)
    assert sv_v[0] <= (1 - eps) ** -0.5 * sv_s[0] * (1 + 1e-10)


def test_input_errors():
    A, R = random_problem(20, 2, seed=0)
    with pytest.raises(DegenerateInputError):
        gl_arnoldi(A, np.zeros((20, 2)), 3)
    with pytest.raises(ParameterError):
        gl_arnoldi(A, R, 0)
    with pytest.raises(ShapeError):
        gl_arnoldi(A, R[:10], 3)
    with pytest.raises(ShapeError):
        rgl_arnoldi(A, R, 3, make_sketch("gaussian", 5, 21))
    with pytest.raises(ParameterError):
        rgl_arnoldi(A, R, 3, None)


def test_semi_norm_degeneracy():
    # a one-row sign sketch annihilates R = s1*e0 - s0*e1
    theta = make_sketch("sparse-sign", 1, 4, seed=0, zeta=1)
    signs = theta.dense()[0]
    R = np.zeros((4, 1))
    R[0, 0], R[1, 0] = signs[1], -signs[0]
    A = sp.identity(4, format="csr") * 2.0
    with pytest.raises(SemiNormDegeneracyError):
        rgl_arnoldi(A, R, 2, theta)


def test_memory_guard():
    A, R = random_problem(100, 4, seed=0)
    with pytest.raises(ResourceError):
        gl_arnoldi(A, R, 50, memory_budget=1000)
    GlobalArnoldi(A, R, 5, memory_budget=(6 * 100 * 4 * 8))


def test_step_returns_column_and_stops_at_maxit():
    A, R = random_problem(40, 1, seed=1)
    proc = GlobalArnoldi(A, R, 2)
    c1 = proc.step()
    c2 = proc.step()
    assert c1.shape == (2,) and c2.shape == (3,)
    with pytest.raises(ParameterError):
        proc.step()


def test_reorthogonalization_improves_orthogonality():
    # strongly nonnormal problem where one-pass MGS loses orthogonality
    n = 200
    A = sp.diags([np.linspace(1, 1e4, n), np.full(n - 1, 50.0)], [0, 1]).tocsr()
    R = np.random.default_rng(0).standard_normal((n, 2))
    one = gl_arnoldi(A, R, 60)
    two = gl_arnoldi(A, R, 60, reorth=True)
    err1 = np.abs(vec_gram(one.basis.blocks) - np.eye(len(one.basis))).max()
    err2 = np.abs(vec_gram(two.basis.blocks) - np.eye(len(two.basis))).max()
    assert err2 <= 1e-12
    assert err2 <= err1
