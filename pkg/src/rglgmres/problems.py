"""Test problems and Matrix Market I/O."""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .blockla import as_block, as_csr, spmm_block
from .errors import MatrixMarketError, ParameterError, ShapeError
from .sketch import keyed_rng

__all__ = [
    "ProblemSpec",
    "gen_convdiff2d",
    "gen_rhs",
    "build_problem",
    "mm_read",
    "mm_write",
    "mm_read_block",
    "mm_write_block",
    "PecletWarning",
]

_RHS_STREAM = 101
_SOLUTION_STREAM = 102


class PecletWarning(UserWarning):
    """Centered convection differences are used above mesh Peclet number 1."""


@dataclass
class ProblemSpec:
    generator: str = "convdiff2d"
    grid: int = 32
    path: str | None = None
    nu: float = 0.01
    wind: tuple = (1.0, 1.0)
    rhs_mode: str = "manufactured"
    s: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.generator not in ("convdiff2d", "matrix-market-file"):
            raise ParameterError(f"unknown generator {self.generator!r}")
        if self.generator == "convdiff2d" and self.grid < 3:
            raise ParameterError(f"grid side must be >= 3, got {self.grid}")
        if self.generator == "matrix-market-file" and not self.path:
            raise ParameterError("matrix-market-file generator needs a path")
        if self.s < 1:
            raise ParameterError(f"s must be >= 1, got {self.s}")
        if self.rhs_mode not in ("random", "manufactured"):
            raise ParameterError(f"rhs_mode must be 'random' or 'manufactured', got {self.rhs_mode!r}")
        self.wind = tuple(float(w) for w in self.wind)
        if len(self.wind) != 2:
            raise ParameterError("wind must have two components")


def gen_convdiff2d(g, nu=0.01, wind=(1.0, 1.0)):
    """Five-point discretization of ``-nu Lap(u) + w . grad(u)`` on the unit square.

    Homogeneous Dirichlet values are eliminated, leaving the ``g x g`` interior
    nodes (x index fastest, ``n = g**2``) with spacing ``h = 1/(g+1)``.
    Convection uses centered differences. Every stencil neighbour inside the
    grid is stored, even if its coefficient happens to be zero.
    """
    if g < 3:
        raise ParameterError(f"grid side must be >= 3, got {g}")
    if not nu > 0:
        raise ParameterError(f"nu must be positive, got {nu}")
    wx, wy = (float(w) for w in wind)
    h = 1.0 / (g + 1)
    peclet = np.hypot(wx, wy) * h / (2 * nu)
    if peclet > 1:
        warnings.warn(f"mesh Peclet number {peclet:.3g} > 1 with centered convection",
                      PecletWarning, stacklevel=2)
    d = nu / h**2
    cx, cy = wx / (2 * h), wy / (2 * h)
    i, j = np.meshgrid(np.arange(g), np.arange(g), indexing="xy")
    i, j = i.ravel(), j.ravel()
    node = i + g * j
    rows, cols, vals = [node], [node], [np.full(g * g, 4 * d)]
    for di, dj, coef in ((-1, 0, -d - cx), (1, 0, -d + cx), (0, -1, -d - cy), (0, 1, -d + cy)):
        ok = (i + di >= 0) & (i + di < g) & (j + dj >= 0) & (j + dj < g)
        rows.append(node[ok])
        cols.append(node[ok] + di + g * dj)
        vals.append(np.full(int(ok.sum()), coef))
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(g * g, g * g)
    )
    return as_csr(A)


def _keyed_columns(seed, stream, n, s):
    out = np.empty((n, s), order="F")
    for j in range(s):
        out[:, j] = keyed_rng(seed, stream, j).standard_normal(n)
    return out


def gen_rhs(A, spec):
    """Seeded right-hand sides.

    Returns ``(B, X_star)``. In ``manufactured`` mode ``X_star`` is random and
    ``B = A X_star``; in ``random`` mode ``B`` is random and ``X_star`` is None.
    Column ``j`` depends only on ``(seed, j)``.
    """
    n = A.shape[0]
    if spec.rhs_mode == "manufactured":
        X = _keyed_columns(spec.seed, _SOLUTION_STREAM, n, spec.s)
        return spmm_block(A, X), X
    return _keyed_columns(spec.seed, _RHS_STREAM, n, spec.s), None


def build_problem(spec):
    """``(A, B, X_star)`` for a :class:`ProblemSpec`."""
    if spec.generator == "convdiff2d":
        A = gen_convdiff2d(spec.grid, spec.nu, spec.wind)
    else:
        A = mm_read(spec.path)
    B, X = gen_rhs(A, spec)
    return A, B, X


# Matrix Market -------------------------------------------------------------


def _header(lines, expected_format):
    """Parse banner and size line; return (symmetry, sizes, 1-based size line number)."""
    if not lines:
        raise MatrixMarketError("empty file", 1)
    banner = lines[0].split()
    if len(banner) != 5 or banner[0] != "%%MatrixMarket":
        raise MatrixMarketError("missing '%%MatrixMarket' banner", 1)
    obj, fmt, fld, sym = (b.lower() for b in banner[1:])
    if obj != "matrix":
        raise MatrixMarketError(f"unsupported object {obj!r}", 1)
    if fmt != expected_format:
        raise MatrixMarketError(f"expected {expected_format!r} format, got {fmt!r}", 1)
    if fld not in ("real", "integer", "double"):
        raise MatrixMarketError(f"field {fld!r} is not real", 1)
    if sym not in ("general", "symmetric"):
        raise MatrixMarketError(f"unsupported symmetry {sym!r}", 1)
    idx = 1
    while idx < len(lines) and (not lines[idx].strip() or lines[idx].lstrip().startswith("%")):
        idx += 1
    if idx == len(lines):
        raise MatrixMarketError("missing size line", idx + 1)
    try:
        size = [int(t) for t in lines[idx].split()]
    except ValueError:
        raise MatrixMarketError("size line must hold integers", idx + 1) from None
    want = 3 if fmt == "coordinate" else 2
    if len(size) != want or min(size) < 0:
        raise MatrixMarketError(f"size line must hold {want} nonnegative integers", idx + 1)
    return sym, size, idx + 1


def _data_lines(lines, start):
    for lineno in range(start + 1, len(lines) + 1):
        text = lines[lineno - 1].strip()
        if text and not text.startswith("%"):
            yield lineno, text.split()


def _float(tok, lineno):
    try:
        v = float(tok)
    except ValueError:
        raise MatrixMarketError(f"cannot parse value {tok!r}", lineno) from None
    if not np.isfinite(v):
        raise MatrixMarketError(f"non-finite value {tok!r}", lineno)
    return v


def mm_read(path):
    """Read a real coordinate Matrix Market file into canonical CSR.

    Symmetric files are expanded (each off-diagonal entry mirrored once).
    Errors carry the 1-based line number of the offending line.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    sym, (nrows, ncols, nnz), size_line = _header(lines, "coordinate")
    if nrows != ncols:
        raise MatrixMarketError(f"matrix must be square, got {nrows}x{ncols}", size_line)
    if nrows < 1:
        raise MatrixMarketError("matrix must have at least one row", size_line)
    r = np.empty(nnz, dtype=np.int64)
    c = np.empty(nnz, dtype=np.int64)
    v = np.empty(nnz)
    seen = {}
    count = 0
    for lineno, toks in _data_lines(lines, size_line):
        if count == nnz:
            raise MatrixMarketError(f"more than the declared {nnz} entries", lineno)
        if len(toks) != 3:
            raise MatrixMarketError(f"expected 'row col value', got {len(toks)} fields", lineno)
        try:
            i, j = int(toks[0]), int(toks[1])
        except ValueError:
            raise MatrixMarketError("row/column indices must be integers", lineno) from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise MatrixMarketError(f"index ({i}, {j}) out of range for {nrows}x{ncols}", lineno)
        if sym == "symmetric" and j > i:
            raise MatrixMarketError(f"symmetric file stores upper-triangle entry ({i}, {j})", lineno)
        if (i, j) in seen:
            raise MatrixMarketError(f"duplicate entry ({i}, {j}), first on line {seen[(i, j)]}", lineno)
        seen[(i, j)] = lineno
        r[count], c[count], v[count] = i - 1, j - 1, _float(toks[2], lineno)
        count += 1
    if count != nnz:
        raise MatrixMarketError(f"declared {nnz} entries, found {count}", len(lines) + 1)
    if sym == "symmetric":
        off = r != c
        r, c, v = np.concatenate([r, c[off]]), np.concatenate([c, r[off]]), np.concatenate([v, v[off]])
    return as_csr(sp.csr_matrix((v, (r, c)), shape=(nrows, ncols)))


def mm_write(path, A, symmetric=False, comment=None):
    """Write ``A`` in coordinate format with 17 significant digits.

    With ``symmetric=True`` only the lower triangle is stored (``A`` must be
    symmetric).
    """
    A = as_csr(A)
    coo = A.tocoo()
    r, c, v = coo.row, coo.col, coo.data
    if symmetric:
        if (A != A.T).nnz:
            raise ParameterError("matrix is not symmetric")
        keep = r >= c
        r, c, v = r[keep], c[keep], v[keep]
    order = np.lexsort((r, c))
    kind = "symmetric" if symmetric else "general"
    with open(path, "w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {kind}\n")
        if comment:
            for line in str(comment).splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{A.shape[0]} {A.shape[1]} {len(v)}\n")
        for k in order:
            fh.write(f"{r[k] + 1} {c[k] + 1} {v[k]:.17g}\n")


def mm_write_block(path, X):
    """Write a dense block as a Matrix Market ``array`` (column-major values)."""
    X = as_block(X)
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix array real general\n")
        fh.write(f"{X.shape[0]} {X.shape[1]}\n")
        for val in X.ravel(order="F"):
            fh.write(f"{val:.17g}\n")


def mm_read_block(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    sym, (m, s), size_line = _header(lines, "array")
    if sym != "general":
        raise MatrixMarketError("dense blocks must be 'general'", 1)
    vals = []
    for lineno, toks in _data_lines(lines, size_line):
        if len(toks) != 1:
            raise MatrixMarketError(f"expected one value per line, got {len(toks)}", lineno)
        if len(vals) == m * s:
            raise MatrixMarketError(f"more than the declared {m * s} values", lineno)
        vals.append(_float(toks[0], lineno))
    if len(vals) != m * s:
        raise MatrixMarketError(f"declared {m * s} values, found {len(vals)}", len(lines) + 1)
    if m < 1 or s < 1:
        raise ShapeError("block must be at least 1x1")
    return np.asarray(vals).reshape((m, s), order="F")
