import numpy as np
import pytest
import scipy.sparse as sp

from rglgmres import kernels

ACCEPTANCE_LINES = []


def random_problem(n, s, seed, density=0.05, shift=1.3):
    """Sparse nonsymmetric ``A`` with spectrum in a unit disc around ``shift``, plus a block ``R``.

    GMRES contracts by roughly ``1/shift`` per step, slow enough that a few
    dozen Arnoldi steps keep the basis well conditioned.
    """
    rng = np.random.default_rng(seed)
    M = sp.random(n, n, density=density, random_state=rng, data_rvs=rng.standard_normal)
    A = (M / np.sqrt(n * density) + shift * sp.identity(n)).tocsr()
    R = np.asfortranarray(rng.standard_normal((n, s)))
    return A, R


def vec_gram(blocks, theta_dense=None):
    """Dense Gram matrix of vectorized (optionally sketched) blocks, via plain numpy."""
    cols = []
    for V in blocks:
        W = V if theta_dense is None else theta_dense @ V
        cols.append(np.asarray(W).ravel(order="F"))
    M = np.column_stack(cols)
    return M.T @ M


def arnoldi_defect(A, blocks, H):
    """max_j ||A V_j - sum_i h_ij V_i||_F / ||A V_j||_F computed densely."""
    Ad = A.toarray()
    worst = 0.0
    for j in range(H.shape[1]):
        AV = Ad @ blocks[j]
        rhs = sum(H[i, j] * blocks[i] for i in range(min(j + 2, len(blocks))))
        worst = max(worst, np.linalg.norm(AV - rhs) / np.linalg.norm(AV))
    return worst


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    with kernels.use_backend(request.param):
        yield request.param


@pytest.fixture
def acceptance_log():
    def log(criterion, passed, detail):
        line = f"[criterion {criterion:>2}] {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
