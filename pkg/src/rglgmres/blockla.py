"""Block vectors, sparse block products, and Frobenius-type reductions.

A block vector is an ``n x s`` float64 numpy array stored in column-major
(Fortran) order, so every right-hand side is contiguous. The sparse matrix is
a canonical :class:`scipy.sparse.csr_matrix` (sorted column indices, no
duplicates, int32 index arrays).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import ParameterError, ShapeError

__all__ = [
    "as_block",
    "as_csr",
    "zeros_block",
    "frob_inner",
    "frob_norm",
    "spmm_block",
    "BasisSequence",
    "diamond_combine",
    "diamond_gram",
]


def as_block(X, name="X"):
    """Return ``X`` as a finite, 2-D, column-major float64 array.

    A 1-D input is treated as a single column (``s = 1``). No copy is made when
    ``X`` already satisfies the layout.
    """
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must have n >= 1 and s >= 1, got shape {arr.shape}")
    arr = np.asfortranarray(arr)
    if not np.isfinite(arr).all():
        raise ParameterError(f"{name} contains NaN or Inf")
    return arr


def zeros_block(n, s):
    return np.zeros((n, s), dtype=np.float64, order="F")


def as_csr(A):
    """Canonicalize a square sparse (or dense) matrix to CSR."""
    if sp.issparse(A):
        M = sp.csr_matrix(A, dtype=np.float64, copy=True)
    else:
        M = sp.csr_matrix(np.asarray(A, dtype=np.float64))
    if M.shape[0] != M.shape[1]:
        raise ShapeError(f"matrix must be square, got shape {M.shape}")
    if M.shape[0] < 1:
        raise ShapeError("matrix must have n >= 1")
    M.sum_duplicates()
    M.sort_indices()
    M.indices = M.indices.astype(np.int32, copy=False)
    M.indptr = M.indptr.astype(np.int32, copy=False)
    if not np.isfinite(M.data).all():
        raise ParameterError("matrix values contain NaN or Inf")
    return M


def _flat(X):
    return X.ravel(order="F")


def _check_same(X, Y):
    if X.shape != Y.shape:
        raise ShapeError(f"shape mismatch: {X.shape} vs {Y.shape}")


def frob_inner(X, Y):
    """Frobenius inner product ``Trace(X^T Y)``."""
    X = np.asfortranarray(X, dtype=np.float64)
    Y = np.asfortranarray(Y, dtype=np.float64)
    _check_same(X, Y)
    return kernels.frob_inner(_flat(X), _flat(Y))


_TINY = np.finfo(np.float64).tiny / np.finfo(np.float64).eps
_HUGE = np.finfo(np.float64).max / 4


def frob_norm(X):
    X = np.asfortranarray(X, dtype=np.float64)
    f = _flat(X)
    sq = kernels.frob_inner(f, f)
    if _TINY < sq < _HUGE:
        return float(np.sqrt(sq))
    # squares under- or overflowed: rescale by the largest magnitude
    m = float(np.abs(f).max()) if f.size else 0.0
    if m == 0.0 or not np.isfinite(m):
        return m
    g = f / m
    return m * float(np.sqrt(kernels.frob_inner(g, g)))


def spmm_block(A, X):
    """Sparse matrix times block vector, column by column.

    ``A`` should already be canonical (see :func:`as_csr`); arbitrary scipy
    sparse input is converted on the fly.
    """
    if not (sp.isspmatrix_csr(A) and A.indices.dtype == np.int32 and A.indptr.dtype == np.int32):
        A = as_csr(A)
    X = np.asfortranarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, s = X.shape
    if A.shape[1] != n:
        raise ShapeError(f"matrix is {A.shape}, block has {n} rows")
    out = np.empty((n, s), dtype=np.float64, order="F")
    kernels.csr_spmm(A.indptr, A.indices, A.data, _flat(X), _flat(out), n, s)
    return out


@dataclass
class BasisSequence:
    """Ordered basis blocks, optionally paired with their sketches."""

    blocks: list = field(default_factory=list)
    sketched: list | None = None

    def __post_init__(self):
        if self.blocks:
            shape = self.blocks[0].shape
            if any(b.shape != shape for b in self.blocks):
                raise ShapeError("basis blocks must share one shape")
        if self.sketched is not None:
            if len(self.sketched) != len(self.blocks):
                raise ShapeError(
                    f"{len(self.sketched)} sketched blocks for {len(self.blocks)} basis blocks"
                )
            if self.sketched and any(b.shape != self.sketched[0].shape for b in self.sketched):
                raise ShapeError("sketched blocks must share one shape")

    def __len__(self):
        return len(self.blocks)

    def __getitem__(self, i):
        return self.blocks[i]

    @property
    def shape(self):
        return self.blocks[0].shape if self.blocks else None

    def head(self, k):
        """The first ``k`` blocks as a new sequence (no copies)."""
        sk = None if self.sketched is None else self.sketched[:k]
        return BasisSequence(self.blocks[:k], sk)

    def stacked(self):
        """``[V_1, ..., V_k]`` as one ``n x (k*s)`` array."""
        return np.hstack(self.blocks)


def diamond_combine(basis, z):
    """Scalar-weighted combination ``sum_i z[i] * V_i`` of the basis blocks."""
    blocks = basis.blocks if isinstance(basis, BasisSequence) else list(basis)
    z = np.asarray(z, dtype=np.float64).ravel()
    if len(z) != len(blocks):
        raise ShapeError(f"{len(z)} coefficients for {len(blocks)} blocks")
    if not blocks:
        raise ShapeError("empty basis")
    out = np.asfortranarray(z[0] * blocks[0])
    f = _flat(out)
    for zi, V in zip(z[1:], blocks[1:]):
        kernels.axpy(float(zi), _flat(V), f)
    return out


def diamond_gram(Y, Z):
    """General diamond product: the matrix of pairwise Frobenius inner products.

    ``Y`` and ``Z`` are sequences of equally-shaped blocks (or
    :class:`BasisSequence`); entry ``(i, j)`` is ``<Y_i, Z_j>_F``.
    """
    Yb = Y.blocks if isinstance(Y, BasisSequence) else list(Y)
    Zb = Z.blocks if isinstance(Z, BasisSequence) else list(Z)
    G = np.empty((len(Yb), len(Zb)))
    for i, Yi in enumerate(Yb):
        for j, Zj in enumerate(Zb):
            G[i, j] = frob_inner(Yi, Zj)
    return G
