"""Command-line harness: ``solve``, ``compare``, ``sweep`` and ``rerun``.

Every command writes a ``manifest.json`` next to its results; ``rerun``
re-executes a run from that file alone.
"""

import argparse
import csv
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from . import __version__, kernels
from .blockla import frob_norm
from .errors import KrylovError, MatrixMarketError, ParameterError
from .problems import ProblemSpec, build_problem, mm_write_block
from .sketch import keyed_rng
from .solver import SketchParams, SolverConfig, gl_gmres, quasi_optimality_ratio, rgl_gmres

EX_OK = 0
EX_ERROR = 1
EX_NOCONVERGE = 2
EX_USAGE = 64
EX_NOINPUT = 66
EX_CANTCREAT = 73

# ratio and bound columns need a dense n x (k+1)s orthonormalization; skip above this size
BOUND_MAX_ENTRIES = 2 * 10**7

_X0_STREAM = 103


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _ell_list(text):
    out = []
    for tok in (t.strip() for t in text.split(",")):
        if not tok:
            continue
        if tok in ("identity", "auto"):
            out.append(tok)
            continue
        try:
            out.append(int(tok))
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"sketch sizes must be integers, 'identity' or 'auto', got {tok!r}"
            ) from None
    if not out:
        raise argparse.ArgumentTypeError("empty list of sketch sizes")
    return out


def _wind(text):
    try:
        wx, wy = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"wind must be 'wx,wy', got {text!r}") from None
    return [wx, wy]


def _add_problem_flags(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--matrix", help="Matrix Market file with A")
    src.add_argument("--gen", choices=["convdiff"], help="generate A")
    p.add_argument("--grid", type=int, default=32, help="grid side g (n = g^2)")
    p.add_argument("--nu", type=float, default=0.01, help="diffusion coefficient")
    p.add_argument("--wind", type=_wind, default=[1.0, 1.0], help="convection 'wx,wy'")
    p.add_argument("--s", type=int, default=1, help="number of right-hand sides")
    p.add_argument("--rhs", choices=["random", "manufactured"], default="manufactured")
    p.add_argument("--x0", choices=["zero", "random"], default="zero", help="initial guess")
    p.add_argument("--seed", type=int, default=0)


def _add_solver_flags(p):
    p.add_argument("--sketch", choices=["identity", "gaussian", "sparsesign"], default="gaussian")
    p.add_argument("--zeta", type=int, default=8, help="nonzeros per column (sparse-sign)")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--maxit", type=int, default=500)
    p.add_argument("--out", default="rglgmres_out", help="output directory")


def build_parser():
    parser = _Parser(prog="rglgmres", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rglgmres {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one solver")
    _add_problem_flags(p)
    p.add_argument("--method", choices=["gl", "rgl"], default="gl")
    p.add_argument("--ell", type=int, help="sketch size")
    _add_solver_flags(p)
    p.add_argument("--true-every", type=int, default=0,
                   help="compute the true residual every p steps (0: only at the end)")
    p.add_argument("--save-solution", action="store_true", help="write X.mtx")

    p = sub.add_parser("compare", help="Gl-GMRES once, RGl-GMRES per sketch size")
    _add_problem_flags(p)
    p.add_argument("--ells", type=_ell_list, required=True,
                   help="comma list of sketch sizes; 'identity' or 'auto' (=min(8(k+1)s, n))")
    _add_solver_flags(p)
    p.add_argument("--no-bound", action="store_true", help="skip the quasi-optimality columns")

    p = sub.add_parser("sweep", help="Cartesian sweep over sketch sizes and block sizes")
    _add_problem_flags(p)
    p.add_argument("--ells", type=_ell_list, required=True)
    p.add_argument("--s-list", type=_int_list, help="block sizes to sweep (default: --s)")
    _add_solver_flags(p)
    p.add_argument("--plot", help="write an SVG chart of the residual histories")
    p.add_argument("--check-monotone", action="store_true",
                   help="fail unless every least-squares residual history is nonincreasing")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("rerun", help="re-execute a run from its manifest.json")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="output directory (default: the manifest's)")
    return parser


def _validate(args, parser):
    def bad(msg):
        parser.error(msg)

    if args.s < 1:
        bad("--s must be >= 1")
    if args.matrix is None and args.grid < 3:
        bad("--grid must be >= 3")
    if not args.nu > 0:
        bad("--nu must be positive")
    if not 0 < args.tol < 1:
        bad("--tol must lie in (0, 1)")
    if args.maxit < 1:
        bad("--maxit must be >= 1")
    if args.zeta < 1:
        bad("--zeta must be >= 1")
    if getattr(args, "ell", None) is not None and args.ell < 1:
        bad("--ell must be >= 1")
    if args.command == "solve" and args.method == "rgl" and args.sketch != "identity" and args.ell is None:
        bad("--method rgl needs --ell (or --sketch identity)")
    for ell in getattr(args, "ells", None) or []:
        if isinstance(ell, int) and ell < 1:
            bad("sketch sizes must be >= 1")
    for s in getattr(args, "s_list", None) or []:
        if s < 1:
            bad("--s-list entries must be >= 1")
    if getattr(args, "jobs", 1) < 1:
        bad("--jobs must be >= 1")
    if getattr(args, "true_every", 0) < 0:
        bad("--true-every must be >= 0")


def _problem_spec(args, s=None):
    if args.matrix is not None:
        return ProblemSpec(generator="matrix-market-file", path=args.matrix, s=s or args.s,
                           rhs_mode=args.rhs, seed=args.seed)
    return ProblemSpec(generator="convdiff2d", grid=args.grid, nu=args.nu, wind=tuple(args.wind),
                       s=s or args.s, rhs_mode=args.rhs, seed=args.seed)


def _initial_guess(args, n, s):
    if args.x0 == "zero":
        return None
    X0 = np.empty((n, s), order="F")
    for j in range(s):
        X0[:, j] = keyed_rng(args.seed, _X0_STREAM, j).standard_normal(n)
    return X0


def _sketch_params(args, kind_or_ell, n, k_gl=None, s=None):
    """Resolve a CLI sketch size token into SketchParams."""
    kind = "sparse-sign" if args.sketch == "sparsesign" else args.sketch
    if kind_or_ell == "identity":
        return SketchParams("identity", n, args.seed, args.zeta)
    if kind_or_ell == "auto":
        ell = min(8 * (k_gl + 1) * s, n)
        return SketchParams(kind, ell, args.seed, args.zeta)
    return SketchParams(kind, int(kind_or_ell), args.seed, args.zeta)


def _write_manifest(out, args):
    data = {k: v for k, v in vars(args).items() if k not in ("out",)}
    manifest = {
        "tool": "rglgmres",
        "version": __version__,
        "backend": kernels.BACKEND,
        "command": args.command,
        "args": data,
        "problem": asdict(_problem_spec(args)),
        "out": os.path.abspath(out),
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _fmt(x):
    if x is None or (isinstance(x, float) and not np.isfinite(x)):
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _aligned(header, rows):
    cells = [header] + [[_fmt(v) if not isinstance(v, float) else f"{v:.4g}" for v in r] for r in rows]
    widths = [max(len(str(r[i])) for r in cells) for i in range(len(header))]
    lines = ["  ".join(str(c).rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _history_rows(report):
    rows = []
    for k, (ls, ms) in enumerate(zip(report.ls_residual_history, report.elapsed_history)):
        rows.append([k, float(ls), report.true_residual_history.get(k), float(ms)])
    return rows


def _err(X, X_star):
    return None if X_star is None else frob_norm(X - X_star)


# commands ------------------------------------------------------------------


def cmd_solve(args):
    spec = _problem_spec(args)
    A, B, X_star = build_problem(spec)
    n = A.shape[0]
    X0 = _initial_guess(args, n, spec.s)
    cfg = SolverConfig(maxit=args.maxit, tol=args.tol, true_residual_cadence=args.true_every)
    if args.method == "gl":
        X, rep = gl_gmres(A, B, X0, cfg)
    else:
        cfg.sketch = _sketch_params(args, "identity" if args.sketch == "identity" else args.ell, n)
        X, rep = rgl_gmres(A, B, X0, cfg)

    out = args.out
    os.makedirs(out, exist_ok=True)
    _write_csv(os.path.join(out, "report.csv"), ["iter", "ls_residual", "true_residual", "elapsed_ms"],
               _history_rows(rep))
    summary = rep.summary()
    summary.update(n=n, s=spec.s, tol=args.tol, err=_err(X, X_star), backend=kernels.BACKEND)
    _write_json(os.path.join(out, "summary.json"), summary)
    if args.save_solution:
        mm_write_block(os.path.join(out, "X.mtx"), X)
    _write_manifest(out, args)
    ell = "-" if rep.ell is None else rep.ell
    print(f"{'Gl-GMRES' if args.method == 'gl' else 'RGl-GMRES'} ell={ell} iter={rep.iterations} "
          f"res={rep.true_residual_final:.3e} rel={rep.relative_residual_final:.3e} "
          f"cpu={rep.cpu_total:.3f}s converged={rep.converged}")
    if rep.sketch_true_divergence:
        print(f"rglgmres: warning: true relative residual {rep.relative_residual_final:.3e} is far above "
              f"tol; the sketch may be too small", file=sys.stderr)
    return EX_OK if rep.converged else EX_NOCONVERGE


COMPARE_HEADER = ["Method", "Sketch", "ell", "CPU(s)", "Iter", "Res", "RelRes", "Converged",
                  "OrthCPU(s)", "Ratio", "Bound", "EpsHat"]


def cmd_compare(args):
    spec = _problem_spec(args)
    A, B, X_star = build_problem(spec)
    n, s = B.shape
    X0 = _initial_guess(args, n, s)
    cfg = SolverConfig(maxit=args.maxit, tol=args.tol)
    X_gl, gl = gl_gmres(A, B, X0, cfg)
    rows = [["Gl-GMRES", None, None, gl.cpu_total, gl.iterations, gl.true_residual_final,
             gl.relative_residual_final, gl.converged, gl.wall_times["orthogonalization"],
             None, None, None]]
    all_converged = gl.converged
    for tok in args.ells:
        params = _sketch_params(args, tok, n, gl.iterations, s)
        rcfg = SolverConfig(maxit=args.maxit, tol=args.tol, sketch=params,
                            keep_basis=not args.no_bound)
        theta = params.build(n)
        rcfg.sketch = theta
        X_r, rep = rgl_gmres(A, B, X0, rcfg)
        all_converged &= rep.converged
        ratio = bound = eps = None
        k = rep.iterations
        if not args.no_bound and k > 0 and (k + 1) * s <= n and n * (k + 1) * s <= BOUND_MAX_ENTRIES:
            if k == gl.iterations:
                X_ref = X_gl
            else:
                X_ref, _ = gl_gmres(A, B, X0, SolverConfig(maxit=k, tol=1e-300))
            q = quasi_optimality_ratio(A, B, X_ref, X_r, theta, X0=X0,
                                       krylov_basis=rep.basis.blocks[:k])
            ratio, bound, eps = q
        rep.basis = None
        rows.append(["RGl-GMRES", theta.kind, theta.ell, rep.cpu_total, rep.iterations,
                     rep.true_residual_final, rep.relative_residual_final, rep.converged,
                     rep.wall_times["orthogonalization"], ratio, bound, eps])

    out = args.out
    os.makedirs(out, exist_ok=True)
    _write_csv(os.path.join(out, "compare.csv"), COMPARE_HEADER, rows)
    text = _aligned(COMPARE_HEADER, rows)
    with open(os.path.join(out, "compare.txt"), "w") as fh:
        fh.write(text)
    _write_manifest(out, args)
    print(text, end="")
    return EX_OK if all_converged else EX_NOCONVERGE


SWEEP_HEADER = ["s", "method", "sketch", "ell", "iterations", "converged", "cpu_s", "res",
                "relative_res"]


def _sweep_cell(args, s, tok, k_gl=None):
    spec = _problem_spec(args, s)
    A, B, _ = build_problem(spec)
    n = A.shape[0]
    X0 = _initial_guess(args, n, s)
    cfg = SolverConfig(maxit=args.maxit, tol=args.tol)
    if tok is None:
        _, rep = gl_gmres(A, B, X0, cfg)
    else:
        cfg.sketch = _sketch_params(args, tok, n, k_gl, s)
        _, rep = rgl_gmres(A, B, X0, cfg)
    return {
        "row": [s, rep.method, rep.sketch_kind, rep.ell, rep.iterations, rep.converged,
                rep.cpu_total, rep.true_residual_final, rep.relative_residual_final],
        "history": [float(h) / rep.initial_residual for h in rep.ls_residual_history],
        "raw_history": [float(h) for h in rep.ls_residual_history],
    }


def _run_cells(args, cells):
    if args.jobs == 1:
        return [_sweep_cell(args, *c) for c in cells]
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        return list(pool.map(_sweep_cell, itertools.repeat(args), *zip(*cells)))


def _plot(path, labels, histories):
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, h in zip(labels, histories):
        ax.semilogy(range(len(h)), np.maximum(h, 1e-300), label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative least-squares residual")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def cmd_sweep(args):
    s_list = sorted(set(args.s_list or [args.s]))
    baselines = _run_cells(args, [(s, None) for s in s_list])
    k_gl = {s: b["row"][4] for s, b in zip(s_list, baselines)}
    ell_keys = sorted(set(args.ells), key=lambda t: (isinstance(t, str), str(t) if isinstance(t, str) else t))
    cells = [(s, tok, k_gl[s]) for s in s_list for tok in ell_keys]
    results = _run_cells(args, cells)

    runs = []
    for s, b in zip(s_list, baselines):
        runs.append(b)
        runs.extend(r for (cs, _, _), r in zip(cells, results) if cs == s)

    out = args.out
    os.makedirs(out, exist_ok=True)
    _write_csv(os.path.join(out, "sweep.csv"), SWEEP_HEADER, [r["row"] for r in runs])
    hist_rows = []
    for r in runs:
        s, method, kind, ell = r["row"][:4]
        for k, h in enumerate(r["raw_history"]):
            hist_rows.append([s, method, kind, ell, k, h])
    _write_csv(os.path.join(out, "histories.csv"),
               ["s", "method", "sketch", "ell", "iter", "ls_residual"], hist_rows)
    labels = [f"{r['row'][1]} s={r['row'][0]}" + ("" if r["row"][3] is None else f" ell={r['row'][3]}")
              for r in runs]
    if args.plot:
        _plot(args.plot, labels, [r["history"] for r in runs])
    _write_manifest(out, args)
    print(_aligned(SWEEP_HEADER, [r["row"] for r in runs]), end="")

    if args.check_monotone:
        bad = [lab for lab, r in zip(labels, runs) if not _nonincreasing(r["raw_history"])]
        if bad:
            print("least-squares residual increased in: " + "; ".join(bad), file=sys.stderr)
            return EX_ERROR
        print("monotone check: all residual histories nonincreasing")
    return EX_OK if all(r["row"][5] for r in runs) else EX_NOCONVERGE


def _nonincreasing(h, rel_slack=1e-12):
    return all(b <= a + rel_slack * h[0] for a, b in zip(h, h[1:]))


def cmd_rerun(args, parser):
    try:
        with open(args.manifest) as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        print(f"rglgmres: manifest not found: {args.manifest}", file=sys.stderr)
        return EX_NOINPUT
    except (json.JSONDecodeError, OSError) as exc:
        print(f"rglgmres: cannot read manifest: {exc}", file=sys.stderr)
        return EX_ERROR
    ns = argparse.Namespace(**manifest["args"])
    ns.out = args.out or manifest["out"]
    return _dispatch(ns, parser)


COMMANDS = {"solve": cmd_solve, "compare": cmd_compare, "sweep": cmd_sweep}


def _dispatch(args, parser):
    if args.command == "rerun":
        return cmd_rerun(args, parser)
    _validate(args, parser)
    if args.matrix is not None and not os.path.exists(args.matrix):
        print(f"rglgmres: input file not found: {args.matrix}", file=sys.stderr)
        return EX_NOINPUT
    try:
        return COMMANDS[args.command](args)
    except ParameterError as exc:
        print(f"rglgmres: error: {exc}", file=sys.stderr)
        return EX_USAGE
    except MatrixMarketError as exc:
        print(f"rglgmres: {args.matrix}: {exc}", file=sys.stderr)
        return EX_ERROR
    except KrylovError as exc:
        print(f"rglgmres: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EX_ERROR
    except OSError as exc:
        print(f"rglgmres: cannot write output: {exc}", file=sys.stderr)
        return EX_CANTCREAT


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return _dispatch(args, parser)


if __name__ == "__main__":
    sys.exit(main())
