"""Global GMRES drivers and convergence-bound diagnostics."""

import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg as la

from .arnoldi import (
    DEFAULT_BREAKDOWN_TOL,
    DEFAULT_MEMORY_BUDGET,
    GlobalArnoldi,
    HessenbergFactor,
)
from .blockla import as_block, as_csr, diamond_combine, frob_norm, spmm_block, zeros_block
from .errors import (
    ConditioningError,
    NumericalFailure,
    ParameterError,
    RankError,
    ShapeError,
)
from .sketch import DEFAULT_ZETA, SketchOperator, estimate_epsilon, make_sketch

__all__ = [
    "GivensLeastSquares",
    "hessenberg_lstsq",
    "SketchParams",
    "SolverConfig",
    "SolveReport",
    "gl_gmres",
    "rgl_gmres",
    "QuasiOptimality",
    "quasi_optimality_ratio",
    "EigenData",
    "theorem21_bound",
]

PHASES = ("matvec", "orthogonalization", "sketch", "least_squares", "other")


class GivensLeastSquares:
    """Progressive solution of ``min ||beta e1 - Hbar z||`` for growing Hessenberg ``Hbar``.

    Columns are appended one at a time; previously computed rotations are
    reused, so each append costs O(k) and the current minimum is available
    without solving for ``z``.
    """

    def __init__(self, beta):
        if beta < 0:
            raise ParameterError(f"beta must be >= 0, got {beta}")
        self.cs = []
        self.sn = []
        self.cols = []
        self.g = [float(beta)]

    @property
    def k(self):
        return len(self.cols)

    @property
    def residual(self):
        return abs(self.g[-1])

    def append(self, h):
        """Add Hessenberg column ``h`` (length ``k+2``); return the new LS residual."""
        h = np.array(h, dtype=np.float64)
        j = self.k
        if h.shape != (j + 2,):
            raise ShapeError(f"column {j + 1} must have {j + 2} entries, got {h.shape}")
        for i, (c, s) in enumerate(zip(self.cs, self.sn)):
            a, b = h[i], h[i + 1]
            h[i] = c * a + s * b
            h[i + 1] = -s * a + c * b
        a, b = h[j], h[j + 1]
        r = np.hypot(a, b)
        if r == 0.0:
            c, s = 1.0, 0.0
        else:
            c, s = a / r, b / r
        h[j] = r
        self.cs.append(c)
        self.sn.append(s)
        gj = self.g[j]
        self.g[j] = c * gj
        self.g.append(-s * gj)
        self.cols.append(h[: j + 1])
        return abs(self.g[-1])

    def solve(self):
        """Back substitution for the current minimizer ``z``."""
        k = self.k
        if k == 0:
            return np.zeros(0)
        R = np.zeros((k, k))
        for j, col in enumerate(self.cols):
            R[: j + 1, j] = col
        if np.any(np.diag(R) == 0.0):
            raise RankError("reduced triangular factor is exactly singular")
        return la.solve_triangular(R, np.asarray(self.g[:k]), lower=False)


def hessenberg_lstsq(hess, beta):
    """Solve ``min_z ||beta e1 - Hbar z||_2`` with Givens rotations.

    Returns ``(z, residual)``.
    """
    H = hess.entries if isinstance(hess, HessenbergFactor) else HessenbergFactor(hess).entries
    lsq = GivensLeastSquares(beta)
    for j in range(H.shape[1]):
        lsq.append(H[: j + 2, j])
    return lsq.solve(), lsq.residual


@dataclass
class SketchParams:
    kind: str = "gaussian"
    ell: int | None = None
    seed: int = 0
    zeta: int = DEFAULT_ZETA

    def build(self, n):
        return make_sketch(self.kind, self.ell, n, self.seed, self.zeta)


@dataclass
class SolverConfig:
    """Solver settings.

    ``sketch`` is a :class:`SketchParams` or a ready :class:`SketchOperator`
    (only used by :func:`rgl_gmres`). ``true_residual_cadence = p > 0`` forms
    the iterate and its true residual every ``p`` steps; ``0`` means only at
    termination.
    """

    maxit: int = 500
    tol: float = 1e-6
    sketch: SketchParams | SketchOperator | None = None
    true_residual_cadence: int = 0
    breakdown_tol: float = DEFAULT_BREAKDOWN_TOL
    memory_budget: int | None = DEFAULT_MEMORY_BUDGET
    reorth: bool = False
    divergence_factor: float = 10.0
    keep_iterates: bool = False
    keep_basis: bool = False

    def __post_init__(self):
        if self.maxit < 1:
            raise ParameterError(f"maxit must be >= 1, got {self.maxit}")
        if not 0.0 < self.tol < 1.0:
            raise ParameterError(f"tol must lie in (0, 1), got {self.tol}")
        if self.true_residual_cadence < 0:
            raise ParameterError("true_residual_cadence must be >= 0")


@dataclass
class SolveReport:
    method: str
    iterations: int
    converged: bool
    ls_residual_history: list
    initial_residual: float
    true_initial_residual: float
    true_residual_final: float
    breakdown: bool = False
    true_residual_history: dict = field(default_factory=dict)
    elapsed_history: list = field(default_factory=list)
    wall_times: dict = field(default_factory=dict)
    seed: int | None = None
    sketch_kind: str | None = None
    ell: int | None = None
    sketch_true_divergence: bool = False
    iterates: list | None = None
    basis: object = None

    @property
    def relative_residual_final(self):
        if self.true_initial_residual == 0.0:
            return 0.0
        return self.true_residual_final / self.true_initial_residual

    @property
    def cpu_total(self):
        return sum(self.wall_times.get(p, 0.0) for p in PHASES)

    def summary(self):
        """Scalar fields as a plain dict (no histories, iterates or basis)."""
        return {
            "method": self.method,
            "sketch": self.sketch_kind,
            "ell": self.ell,
            "seed": self.seed,
            "iterations": self.iterations,
            "converged": self.converged,
            "breakdown": self.breakdown,
            "initial_residual": self.initial_residual,
            "true_initial_residual": self.true_initial_residual,
            "ls_residual_final": self.ls_residual_history[-1],
            "res": self.true_residual_final,
            "relative_res": self.relative_residual_final,
            "sketch_true_divergence": self.sketch_true_divergence,
            "cpu_s": self.cpu_total,
            "phases_s": {p: self.wall_times.get(p, 0.0) for p in PHASES},
        }


def _gmres(method, A, B, X0, cfg, theta):
    t_start = time.perf_counter()
    timings = {p: 0.0 for p in PHASES}
    A = as_csr(A)
    B = as_block(B, "B")
    n, s = B.shape
    if A.shape[0] != n:
        raise ShapeError(f"matrix is {A.shape}, right-hand side has {n} rows")
    X0 = zeros_block(n, s) if X0 is None else as_block(X0, "X0")
    if X0.shape != B.shape:
        raise ShapeError(f"X0 has shape {X0.shape}, B has {B.shape}")

    t0 = time.perf_counter()
    R0 = B - spmm_block(A, X0)
    timings["matvec"] += time.perf_counter() - t0
    r0 = frob_norm(R0)
    report = SolveReport(
        method=method, iterations=0, converged=False, ls_residual_history=[],
        initial_residual=0.0, true_initial_residual=r0, true_residual_final=r0,
        seed=None if theta is None else theta.seed,
        sketch_kind=None if theta is None else theta.kind,
        ell=None if theta is None else theta.ell,
    )

    def finish(X):
        total = time.perf_counter() - t_start
        timings["other"] = max(total - sum(timings[p] for p in PHASES if p != "other"), 0.0)
        report.wall_times = timings
        return X, report

    if r0 == 0.0:
        report.converged = True
        report.ls_residual_history = [0.0]
        report.elapsed_history = [(time.perf_counter() - t_start) * 1e3]
        report.true_residual_history = {0: 0.0}
        if cfg.keep_iterates:
            report.iterates = [X0.copy()]
        return finish(X0.copy())

    proc = GlobalArnoldi(A, R0, cfg.maxit, theta, cfg.breakdown_tol, cfg.reorth,
                         cfg.memory_budget, timings)
    beta = proc.beta
    lsq = GivensLeastSquares(beta)
    history = [beta]
    elapsed = [(time.perf_counter() - t_start) * 1e3]
    true_hist = {0: r0}
    iterates = [X0.copy()] if cfg.keep_iterates else None
    cadence = cfg.true_residual_cadence

    def current_iterate():
        t = time.perf_counter()
        z = lsq.solve()
        X = X0 + diamond_combine(proc.blocks[: lsq.k], z)
        timings["least_squares"] += time.perf_counter() - t
        return X

    def true_residual(X):
        t = time.perf_counter()
        r = frob_norm(B - spmm_block(A, X))
        timings["matvec"] += time.perf_counter() - t
        return r

    X = None
    while proc.k < cfg.maxit and not proc.breakdown:
        col = proc.step()
        t = time.perf_counter()
        res = lsq.append(col)
        timings["least_squares"] += time.perf_counter() - t
        if not np.isfinite(res):
            raise NumericalFailure("non-finite least-squares residual", proc.k)
        history.append(res)
        k = proc.k
        X = None
        if iterates is not None or (cadence and k % cadence == 0):
            X = current_iterate()
            if iterates is not None:
                iterates.append(X)
            if cadence and k % cadence == 0:
                true_hist[k] = true_residual(X)
        elapsed.append((time.perf_counter() - t_start) * 1e3)
        if res <= cfg.tol * beta:
            report.converged = True
            break

    k = proc.k
    if X is None:
        X = current_iterate()
    if k not in true_hist:
        true_hist[k] = true_residual(X)
    if not np.isfinite(X).all():
        raise NumericalFailure("non-finite iterate", k)

    report.iterations = k
    report.breakdown = proc.breakdown
    report.ls_residual_history = history
    report.initial_residual = beta
    report.true_residual_history = true_hist
    report.true_residual_final = true_hist[k]
    report.elapsed_history = elapsed
    report.iterates = iterates
    if cfg.keep_basis:
        report.basis = proc.result().basis
    if theta is not None:
        report.sketch_true_divergence = (
            report.relative_residual_final > cfg.divergence_factor * cfg.tol
        )
    return finish(X)


def gl_gmres(A, B, X0=None, cfg=None):
    """Global GMRES for ``A X = B``.

    Minimizes ``||B - A X||_F`` over ``X0 + K_k(A, R0)``, stopping when the
    relative residual ``||R_k||_F / ||R0||_F`` drops to ``cfg.tol``, after
    ``cfg.maxit`` steps, or at a breakdown. Returns ``(X, report)``.
    """
    cfg = cfg or SolverConfig()
    return _gmres("gl", A, B, X0, cfg, None)


def rgl_gmres(A, B, X0=None, cfg=None):
    """Randomized global GMRES for ``A X = B``.

    Minimizes the sketched residual ``||Theta (B - A X)||_F`` over
    ``X0 + K_k(A, R0)``; convergence is declared on the sketched relative
    residual. The true residual is computed at termination and
    ``report.sketch_true_divergence`` is set when its relative value exceeds
    ``cfg.divergence_factor * cfg.tol``.
    """
    cfg = cfg or SolverConfig()
    if cfg.sketch is None:
        raise ParameterError("rgl_gmres needs cfg.sketch")
    n = np.shape(B)[0]
    theta = cfg.sketch if isinstance(cfg.sketch, SketchOperator) else cfg.sketch.build(n)
    return _gmres("rgl", A, B, X0, cfg, theta)


class QuasiOptimality(NamedTuple):
    ratio: float
    bound: float
    epsilon_hat: float

    @property
    def applicable(self):
        """False when the measured distortion is >= 1 and the bound says nothing."""
        return self.epsilon_hat < 1.0


def _monomial_blocks(A, R0, k):
    blocks, V = [], R0 / frob_norm(R0)
    for _ in range(k):
        blocks.append(V)
        V = spmm_block(A, V)
        V = V / frob_norm(V)
    return blocks


def _range_basis(M, rtol=1e-10):
    """Orthonormal basis of the numerical range of ``M``."""
    U, sv, _ = la.svd(M, full_matrices=False)
    return U[:, sv > rtol * sv[0]]


def quasi_optimality_ratio(A, B, X_gl, X_rgl, theta, X0=None, krylov_basis=None, k=None):
    """Compare the sketched and exact global GMRES iterates at the same step.

    ``ratio = ||B - A X_rgl||_F^2 / ||B - A X_gl||_F^2`` and
    ``bound = (1 + eps) / (1 - eps)``, where ``eps`` is measured by
    :func:`estimate_epsilon` on the span of the columns of ``R0`` and of
    ``A V_i`` for the Krylov blocks ``V_1..V_k`` (dependent columns are
    dropped, since only the subspace matters). Those blocks come from
    ``krylov_basis`` (any sequence spanning ``K_k(A, R0)``) or, when only ``k``
    is given, from normalized powers ``A^i R0``. When ``eps >= 1`` the bound is
    ``inf``.
    """
    A = as_csr(A)
    B = as_block(B, "B")
    X0 = zeros_block(*B.shape) if X0 is None else as_block(X0, "X0")
    R0 = B - spmm_block(A, X0)
    if krylov_basis is None:
        if k is None:
            raise ParameterError("pass krylov_basis or k")
        krylov_basis = _monomial_blocks(A, R0, k)
    blocks = getattr(krylov_basis, "blocks", krylov_basis)
    r_gl = frob_norm(B - spmm_block(A, as_block(X_gl, "X_gl")))
    r_rgl = frob_norm(B - spmm_block(A, as_block(X_rgl, "X_rgl")))
    if r_gl == 0.0:
        ratio = 1.0 if r_rgl == 0.0 else np.inf
    else:
        ratio = (r_rgl / r_gl) ** 2
    span = np.hstack([R0] + [spmm_block(A, V) for V in blocks])
    eps = estimate_epsilon(theta, _range_basis(span)).epsilon
    bound = (1.0 + eps) / (1.0 - eps) if eps < 1.0 else np.inf
    return QuasiOptimality(float(ratio), float(bound), float(eps))


@dataclass
class EigenData:
    """Eigendecomposition data ``A = Z diag(eigenvalues) Z^{-1}`` with ``Z coeffs = R0``."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    coeffs: np.ndarray
    z_norm2: float = float("nan")

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=np.float64).ravel()
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.coeffs = as_block(self.coeffs, "coeffs")
        n = len(self.eigenvalues)
        if self.vectors.shape != (n, n) or self.coeffs.shape[0] != n:
            raise ShapeError("eigenvector matrix and coefficients must match the eigenvalue count")
        if np.isnan(self.z_norm2):
            self.z_norm2 = float(np.linalg.norm(self.vectors, 2))

    @classmethod
    def from_decomposition(cls, eigenvalues, vectors, R0, cond_limit=1e12):
        """Solve ``Z beta = R0`` and check the reconstruction."""
        Z = np.asarray(vectors, dtype=np.float64)
        R0 = as_block(R0, "R0")
        c = np.linalg.cond(Z)
        if not c < cond_limit:
            raise ConditioningError(f"eigenvector matrix condition number {c:.2e} is too large")
        coeffs = np.linalg.solve(Z, R0)
        if np.linalg.norm(Z @ coeffs - R0) > 1e-10 * max(np.linalg.norm(R0), 1e-300):
            raise ConditioningError("Z beta does not reconstruct R0 to 1e-10")
        return cls(eigenvalues, Z, coeffs)

    @classmethod
    def diagonal(cls, diag, R0):
        """Data for a diagonal matrix: ``Z = I`` and ``beta = R0``."""
        d = np.asarray(diag, dtype=np.float64).ravel()
        return cls(d, np.eye(len(d)), R0, 1.0)


def theorem21_bound(eig, k, gamma=1.0, cond_limit=1e14):
    """Upper bound on the squared residual norm after ``k`` global GMRES steps.

    ``||Z||_2^2 / (e1^T (V^T D V)^{-1} e1)`` with ``V`` the ``n x (k+1)``
    Vandermonde matrix in the eigenvalues and ``D`` the row sums of the
    squared coefficients; multiplied by ``gamma`` (pass
    ``(1+eps)/(1-eps)`` for the sketched method).

    The reciprocal ``1 / (e1^T G^{-1} e1)`` is the Schur complement of the
    leading entry of ``G = V^T D V``, evaluated here as a least-squares residual.
    """
    lam = eig.eigenvalues
    n = len(lam)
    if k < 0 or k + 1 > n:
        raise ParameterError(f"k must satisfy 0 <= k <= n-1 = {n - 1}, got {k}")
    D = np.einsum("ij,ij->i", eig.coeffs, eig.coeffs)
    M = np.sqrt(D)[:, None] * np.vander(lam, k + 1, increasing=True)
    scale = np.linalg.norm(M, axis=0)
    if np.any(scale == 0.0):
        raise ConditioningError("Gram matrix is singular (zero weighted Vandermonde column)")
    Ms = M / scale
    sv = la.svdvals(Ms)
    cond = (sv[0] / sv[-1]) ** 2 if sv[-1] > 0 else np.inf
    if not cond < cond_limit:
        active = np.sort(lam[D > 0])
        pair = None
        if len(active) > 1:
            i = int(np.argmin(np.diff(active)))
            pair = (float(active[i]), float(active[i + 1]))
        raise ConditioningError(
            f"Vandermonde Gram matrix condition {cond:.2e} exceeds {cond_limit:.0e}; "
            f"closest eigenvalues {pair}",
            pair,
        )
    m0 = M[:, 0]
    if k == 0:
        schur = float(m0 @ m0)
    else:
        c, *_ = la.lstsq(Ms[:, 1:], -m0)
        r = m0 + Ms[:, 1:] @ c
        schur = float(r @ r)
    return gamma * eig.z_norm2**2 * schur
