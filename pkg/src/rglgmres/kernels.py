"""Backend selection for the hot loops.

The compiled Cython module is used when it was built; otherwise the numpy
fallback is loaded. Set ``RGLGMRES_BACKEND=python`` to force the fallback, or
call :func:`set_backend` at runtime. Callers must go through this module's
attributes (``kernels.frob_inner``) so a switch takes effect everywhere.
"""

import os
from contextlib import contextmanager

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_NAMES = ("frob_inner", "axpy", "csr_spmm", "sparse_sign_apply")

BACKEND = None


def available_backends():
    return ["compiled", "python"] if _compiled is not None else ["python"]


def set_backend(name):
    """Bind the kernel functions to ``"compiled"`` or ``"python"``."""
    global BACKEND
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        impl = _compiled
    elif name == "python":
        impl = _fallback
    else:
        raise ValueError(f"unknown backend {name!r}")
    g = globals()
    for fn in _NAMES:
        g[fn] = getattr(impl, fn)
    BACKEND = name


@contextmanager
def use_backend(name):
    previous = BACKEND
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


set_backend(os.environ.get("RGLGMRES_BACKEND") or ("compiled" if _compiled is not None else "python"))
