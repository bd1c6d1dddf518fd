"""Numpy implementations of the routines in ``_kernels.pyx``.

Signatures and buffer conventions match the compiled module exactly so the two
can be swapped at import time.
"""

import numpy as np
import scipy.sparse as sp


def frob_inner(x, y):
    return float(np.add.reduce(np.multiply(x, y), dtype=np.longdouble))


def axpy(a, x, y):
    y += a * x


def csr_spmm(indptr, indices, data, x, out, n, s):
    A = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    out[:] = (A @ x.reshape((n, s), order="F")).ravel(order="F")


def sparse_sign_apply(rows, vals, zeta, x, out, n, s, ell):
    X = x.reshape((n, s), order="F")
    v = vals.reshape((n, zeta))
    for j in range(s):
        # bincount accumulates sequentially, matching the compiled loop order
        out[j * ell:(j + 1) * ell] += np.bincount(
            rows, weights=(v * X[:, j, None]).ravel(), minlength=ell
        )
