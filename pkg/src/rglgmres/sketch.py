"""Random sketching operators and empirical embedding quality.

Randomness is drawn from counter-based Philox streams keyed by
``(seed, stream id, column block)``, so the operator is a pure function of its
parameters and any column block can be regenerated independently of the
others.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from . import kernels
from .blockla import frob_inner
from .errors import ParameterError, RankError, ShapeError

__all__ = [
    "SketchOperator",
    "EmbeddingReport",
    "make_sketch",
    "apply_sketch",
    "sketched_inner",
    "estimate_epsilon",
    "keyed_rng",
    "KINDS",
]

KINDS = ("identity", "gaussian", "sparse-sign")
_ALIASES = {"sparsesign": "sparse-sign", "sparse_sign": "sparse-sign", "gauss": "gaussian"}
_STREAM_ID = {"gaussian": 1, "sparse-sign": 2}

# columns of Theta generated per keyed stream
BLOCK_COLUMNS = 4096
DEFAULT_ZETA = 8
DEFAULT_MEMORY_BUDGET = 256 * 2**20


def keyed_rng(seed, *key):
    """A Philox generator for the stream identified by ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SketchOperator:
    """The sketching map ``Theta: R^n -> R^ell``.

    ``gaussian`` has i.i.d. N(0, 1/ell) entries. ``sparse-sign`` has
    ``min(zeta, ell)`` nonzeros per column, each ``+-1/sqrt(min(zeta, ell))``,
    at distinct random rows; it is stored only as that pattern. ``identity``
    is the exact identity (``ell == n``).
    """

    kind: str
    ell: int
    n: int
    seed: int = 0
    zeta: int = DEFAULT_ZETA
    memory_budget: int = field(default=DEFAULT_MEMORY_BUDGET, compare=False)
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ParameterError(f"unknown sketch kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        if self.ell < 1:
            raise ParameterError(f"sketch size ell must be >= 1, got {self.ell}")
        if kind == "identity" and self.ell != self.n:
            raise ParameterError(f"identity sketch requires ell == n ({self.n}), got {self.ell}")
        if kind == "sparse-sign" and self.ell > self.n:
            raise ParameterError(f"sparse-sign sketch requires ell <= n ({self.n}), got {self.ell}")
        if kind == "sparse-sign" and self.zeta < 1:
            raise ParameterError(f"zeta must be >= 1, got {self.zeta}")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must fit in an unsigned 64-bit integer")

    @property
    def nnz_per_column(self):
        if self.kind == "sparse-sign":
            return min(self.zeta, self.ell)
        return 1 if self.kind == "identity" else self.ell

    def _column_blocks(self):
        for b, start in enumerate(range(0, self.n, BLOCK_COLUMNS)):
            yield b, start, min(start + BLOCK_COLUMNS, self.n)

    def _gaussian_block(self, b, ncols):
        rng = keyed_rng(self.seed, _STREAM_ID["gaussian"], b)
        G = rng.standard_normal((self.ell, ncols))
        G /= np.sqrt(self.ell)
        return G

    def _gaussian_blocks(self):
        blocks = self._cache.get("gaussian")
        if blocks is not None:
            return blocks
        gen = (self._gaussian_block(b, stop - start) for b, start, stop in self._column_blocks())
        if self.ell * self.n * 8 <= self.memory_budget:
            blocks = list(gen)
            self._cache["gaussian"] = blocks
            return blocks
        return gen

    def _sparse_pattern(self):
        pattern = self._cache.get("sparse")
        if pattern is not None:
            return pattern
        z = self.nnz_per_column
        rows, vals = [], []
        for b, start, stop in self._column_blocks():
            rng = keyed_rng(self.seed, _STREAM_ID["sparse-sign"], b)
            nb = stop - start
            if z == self.ell:
                r = np.tile(np.arange(self.ell, dtype=np.int64), (nb, 1))
            else:
                r = rng.integers(0, self.ell, size=(nb, z), dtype=np.int64)
                while True:
                    r.sort(axis=1)
                    dup = (np.diff(r, axis=1) == 0).any(axis=1)
                    if not dup.any():
                        break
                    r[dup] = rng.integers(0, self.ell, size=(int(dup.sum()), z), dtype=np.int64)
            signs = rng.integers(0, 2, size=(nb, z)) * 2.0 - 1.0
            rows.append(r.ravel())
            vals.append(signs.ravel() / np.sqrt(z))
        pattern = (np.concatenate(rows), np.concatenate(vals))
        self._cache["sparse"] = pattern
        return pattern

    def apply(self, X):
        """``Theta @ X`` for an ``n x s`` block; returns an ``ell x s`` block."""
        X = np.asfortranarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != self.n:
            raise ShapeError(f"sketch expects {self.n} rows, block has {X.shape[0]}")
        s = X.shape[1]
        if self.kind == "identity":
            return np.array(X, order="F", copy=True)
        out = np.zeros((self.ell, s), dtype=np.float64, order="F")
        if self.kind == "gaussian":
            blocks = self._gaussian_blocks()
            for (b, start, stop), G in zip(self._column_blocks(), blocks):
                out += G @ X[start:stop]
            return out
        rows, vals = self._sparse_pattern()
        kernels.sparse_sign_apply(
            rows, vals, self.nnz_per_column, X.ravel(order="F"), out.ravel(order="F"),
            self.n, s, self.ell,
        )
        return out

    def dense(self):
        """Materialize Theta as an ``ell x n`` array (for small test problems)."""
        if self.kind == "gaussian":
            return np.hstack(list(self._gaussian_blocks()))
        return self.apply(np.eye(self.n))


def make_sketch(kind, ell, n, seed=0, zeta=DEFAULT_ZETA, memory_budget=DEFAULT_MEMORY_BUDGET):
    """Build a deterministic sketching operator.

    For ``kind="identity"`` pass ``ell=None`` or ``ell=n``.
    """
    if _ALIASES.get(kind, kind) == "identity" and ell is None:
        ell = n
    if ell is None:
        raise ParameterError("ell is required for random sketches")
    return SketchOperator(kind, int(ell), int(n), int(seed), int(zeta), int(memory_budget))


def apply_sketch(theta, X):
    return theta.apply(X)


def sketched_inner(theta, X, Y):
    """``<X, Y>_Theta = Trace(X^T Theta^T Theta Y)``."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape != Y.shape:
        raise ShapeError(f"shape mismatch: {X.shape} vs {Y.shape}")
    return frob_inner(theta.apply(X), theta.apply(Y))


@dataclass
class EmbeddingReport:
    epsilon: float
    dimension: int
    trials: int = 1
    sigma_min: float = float("nan")
    sigma_max: float = float("nan")


def estimate_epsilon(theta, V, rank_tol=1e-10):
    """Measured distortion of ``theta`` on ``range(V)``.

    ``V`` is an ``n x d`` matrix of full column rank. With ``Q`` an orthonormal
    basis of its range, the returned epsilon is
    ``max(sigma_max(Theta Q)**2 - 1, 1 - sigma_min(Theta Q)**2)``, the smallest
    value for which ``theta`` is an epsilon-embedding of the subspace.
    """
    V = np.asarray(V, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[0] != theta.n:
        raise ShapeError(f"sketch expects {theta.n} rows, V has {V.shape[0]}")
    d = V.shape[1]
    if d > V.shape[0]:
        raise RankError(f"{d} columns cannot be independent in R^{V.shape[0]}")
    Q, R, _ = la.qr(V, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] == 0 or diag[-1] <= rank_tol * diag[0]:
        raise RankError(
            f"V is numerically rank deficient (|r_dd|/|r_11| = {diag[-1] / max(diag[0], 1e-300):.2e})"
        )
    sv = la.svdvals(theta.apply(Q))
    smax, smin = sv[0], (sv[-1] if len(sv) == d else 0.0)
    eps = max(smax**2 - 1.0, 1.0 - smin**2)
    return EmbeddingReport(float(eps), d, 1, float(smin), float(smax))
