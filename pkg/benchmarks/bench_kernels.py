"""Time the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--grid 64] [--s 20] [--repeat 5]
"""

import argparse
import time
import warnings

import numpy as np

from rglgmres import SolverConfig, gen_convdiff2d, gl_gmres, make_sketch, rgl_gmres
from rglgmres import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(A, s, rng):
    n = A.shape[0]
    x = np.asfortranarray(rng.standard_normal((n, s))).ravel(order="F")
    y = rng.standard_normal(n * s)
    out = np.empty(n * s)
    indptr = A.indptr.astype(np.intc)
    indices = A.indices.astype(np.intc)
    zeta, ell = 8, 8 * s * 4
    rows = rng.integers(0, ell, n * zeta).astype(np.int64)
    vals = rng.choice([-1.0, 1.0], n * zeta) / np.sqrt(zeta)
    sk = np.zeros(ell * s)

    def spmm():
        kernels.csr_spmm(indptr, indices, A.data, x, out, n, s)

    def sign():
        sk[:] = 0.0
        kernels.sparse_sign_apply(rows, vals, zeta, x, sk, n, s, ell)

    return {
        "frob_inner": lambda: kernels.frob_inner(x, y),
        "axpy": lambda: kernels.axpy(0.5, x, y),
        "csr_spmm": spmm,
        "sparse_sign_apply": sign,
    }


def solve_cases(A, s, rng):
    n = A.shape[0]
    B = rng.standard_normal((n, s))
    cfg = SolverConfig(tol=1e-6, maxit=60)
    theta = make_sketch("sparsesign", min(8 * 61 * s, n), n, seed=1)
    rcfg = SolverConfig(tol=1e-6, maxit=60, sketch=theta)
    return {
        "gl_gmres (60 it)": lambda: gl_gmres(A, B, cfg=cfg),
        "rgl_gmres (60 it)": lambda: rgl_gmres(A, B, cfg=rcfg),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=64)
    ap.add_argument("--s", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        A = gen_convdiff2d(args.grid, nu=0.05)
    backends = kernels.available_backends()
    print(f"n={A.shape[0]}  s={args.s}  backends={backends}")
    print(f"{'case':<22}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")

    for build, repeat in ((kernel_cases, args.repeat), (solve_cases, 1)):
        cases = build(A, args.s, np.random.default_rng(0))
        for name, fn in cases.items():
            row = {}
            for b in backends:
                with kernels.use_backend(b):
                    fn()  # warm up
                    row[b] = best_of(fn, repeat)
            line = f"{name:<22}" + "".join(f"{row[b] * 1e3:>12.3f}ms" for b in backends)
            if len(backends) == 2:
                line += f"{row['python'] / row['compiled']:>9.2f}x"
            print(line)


if __name__ == "__main__":
    main()
