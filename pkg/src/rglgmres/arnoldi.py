"""Global Arnoldi processes (exact Frobenius and sketched).

Both variants run modified Gram-Schmidt on ``n x s`` blocks with scalar
coefficients. The sketched variant measures every inner product on the
sketched blocks ``S_i = Theta Q_i``, which are carried along so that ``Theta``
is applied exactly once per step.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .blockla import BasisSequence, as_block, as_csr, frob_norm, spmm_block
from .errors import (
    DegenerateInputError,
    NumericalFailure,
    ParameterError,
    ResourceError,
    SemiNormDegeneracyError,
    ShapeError,
)

__all__ = [
    "HessenbergFactor",
    "ArnoldiResult",
    "GlobalArnoldi",
    "gl_arnoldi",
    "rgl_arnoldi",
    "DEFAULT_BREAKDOWN_TOL",
    "DEFAULT_MEMORY_BUDGET",
]

DEFAULT_BREAKDOWN_TOL = 1e-14
DEFAULT_MEMORY_BUDGET = 4 * 2**30


@dataclass
class HessenbergFactor:
    """A ``(k+1) x k`` upper Hessenberg coefficient matrix."""

    entries: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.entries, dtype=np.float64)
        if H.ndim != 2 or H.shape[0] != H.shape[1] + 1:
            raise ShapeError(f"Hessenberg factor must be (k+1) x k, got {H.shape}")
        if np.any(np.tril(H, -2)):
            raise ParameterError("entries below the first subdiagonal must be zero")
        self.entries = H

    @property
    def k(self):
        return self.entries.shape[1]

    @property
    def square(self):
        """The leading ``k x k`` block."""
        return self.entries[:-1]


@dataclass
class ArnoldiResult:
    basis: BasisSequence
    hess: HessenbergFactor
    beta: float
    breakdown: bool = False
    breakdown_step: int | None = None


def _flat(X):
    return X.ravel(order="F")


class GlobalArnoldi:
    """Incremental global Arnoldi process.

    With ``theta=None`` the basis is F-orthonormal; otherwise it is orthonormal
    in the sketched inner product ``<Theta X, Theta Y>_F``. Each call to
    :meth:`step` adds one Hessenberg column and returns it.

    ``timings``, when given, is a dict accumulating seconds under the keys
    ``matvec``, ``sketch`` and ``orthogonalization``.
    """

    def __init__(self, A, R0, maxit, theta=None, breakdown_tol=DEFAULT_BREAKDOWN_TOL,
                 reorth=False, memory_budget=DEFAULT_MEMORY_BUDGET, timings=None):
        if maxit < 1:
            raise ParameterError(f"number of Arnoldi steps must be >= 1, got {maxit}")
        self.A = as_csr(A)
        R0 = as_block(R0, "R0")
        n, s = R0.shape
        if self.A.shape[0] != n:
            raise ShapeError(f"matrix is {self.A.shape}, residual block has {n} rows")
        if theta is not None and theta.n != n:
            raise ShapeError(f"sketch expects {theta.n} rows, problem has {n}")
        ell = 0 if theta is None else theta.ell
        need = (maxit + 1) * (n + ell) * s * 8
        if memory_budget is not None and need > memory_budget:
            raise ResourceError(
                f"storing {maxit + 1} basis blocks of {n}x{s} (+ {ell}x{s} sketches) needs "
                f"{need / 2**20:.0f} MiB, over the {memory_budget / 2**20:.0f} MiB budget"
            )
        self.theta = theta
        self.maxit = maxit
        self.breakdown_tol = breakdown_tol
        self.reorth = reorth
        self.timings = timings if timings is not None else {}
        for key in ("matvec", "sketch", "orthogonalization"):
            self.timings.setdefault(key, 0.0)

        if theta is None:
            beta = frob_norm(R0)
            if beta == 0.0:
                raise DegenerateInputError("initial residual block is zero")
            self.blocks = [R0 / beta]
            self.sketched = None
        else:
            t0 = time.perf_counter()
            S0 = theta.apply(R0)
            self.timings["sketch"] += time.perf_counter() - t0
            beta = frob_norm(S0)
            if beta == 0.0:
                if frob_norm(R0) > 0.0:
                    raise SemiNormDegeneracyError(
                        "the sketch maps the nonzero initial residual to zero"
                    )
                raise DegenerateInputError("initial residual block is zero")
            self.blocks = [R0 / beta]
            self.sketched = [S0 / beta]
        self.beta = beta
        self.H = np.zeros((maxit + 1, maxit))
        self.k = 0
        self.breakdown = False

    def step(self):
        """Run one Arnoldi step.

        Returns the new Hessenberg column (length ``k+1`` after the step,
        subdiagonal entry last). Raises once the process has broken down or
        reached ``maxit``.
        """
        if self.breakdown or self.k >= self.maxit:
            raise ParameterError("Arnoldi process cannot take further steps")
        j = self.k
        timings = self.timings
        t0 = time.perf_counter()
        W = spmm_block(self.A, self.blocks[j])
        t1 = time.perf_counter()
        timings["matvec"] += t1 - t0

        if self.theta is None:
            P, basis_p = W, self.blocks
        else:
            Z = self.theta.apply(W)
            t2 = time.perf_counter()
            timings["sketch"] += t2 - t1
            t1 = t2
            P, basis_p = Z, self.sketched
        ref = frob_norm(P)
        w, p = _flat(W), _flat(P)
        sketched = self.theta is not None
        for _ in range(2 if self.reorth else 1):
            for i in range(j + 1):
                h = kernels.frob_inner(p, _flat(basis_p[i]))
                kernels.axpy(-h, _flat(self.blocks[i]), w)
                if sketched:
                    kernels.axpy(-h, _flat(self.sketched[i]), p)
                self.H[i, j] += h
        hnext = frob_norm(P)
        timings["orthogonalization"] += time.perf_counter() - t1

        col = self.H[: j + 1, j]
        if not (np.isfinite(col).all() and np.isfinite(hnext)):
            raise NumericalFailure("non-finite Hessenberg entry", j + 1)
        self.H[j + 1, j] = hnext
        self.k = j + 1
        if hnext <= self.breakdown_tol * ref:
            self.breakdown = True
        else:
            self.blocks.append(W / hnext)
            if sketched:
                self.sketched.append(P / hnext)
        return self.H[: j + 2, j].copy()

    def result(self):
        basis = BasisSequence(self.blocks, self.sketched)
        return ArnoldiResult(
            basis=basis,
            hess=HessenbergFactor(self.H[: self.k + 1, : self.k].copy()),
            beta=self.beta,
            breakdown=self.breakdown,
            breakdown_step=self.k if self.breakdown else None,
        )


def _run(A, R0, k, theta, breakdown_tol, reorth, memory_budget):
    proc = GlobalArnoldi(A, R0, k, theta, breakdown_tol, reorth, memory_budget)
    while proc.k < k and not proc.breakdown:
        proc.step()
    return proc.result()


def gl_arnoldi(A, R0, k, breakdown_tol=DEFAULT_BREAKDOWN_TOL, *, reorth=False,
               memory_budget=DEFAULT_MEMORY_BUDGET):
    """``k`` steps of the global Arnoldi process (F-orthonormal basis).

    Returns an :class:`ArnoldiResult` with ``k+1`` blocks and a ``(k+1) x k``
    Hessenberg factor, or fewer blocks and ``breakdown=True`` if the Krylov
    space became invariant.
    """
    return _run(A, R0, k, None, breakdown_tol, reorth, memory_budget)


def rgl_arnoldi(A, R0, k, theta, breakdown_tol=DEFAULT_BREAKDOWN_TOL, *, reorth=False,
                memory_budget=DEFAULT_MEMORY_BUDGET):
    """``k`` steps of the sketched global Arnoldi process.

    The blocks ``Q_i`` are orthonormal in ``<Theta X, Theta Y>_F`` and the
    result's ``basis.sketched`` holds ``S_i = Theta Q_i``. ``beta`` is
    ``||Theta R0||_F``.
    """
    if theta is None:
        raise ParameterError("rgl_arnoldi requires a sketch operator")
    return _run(A, R0, k, theta, breakdown_tol, reorth, memory_budget)
