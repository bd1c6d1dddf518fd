# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Every routine works on flat column-major buffers."""

cimport cython


def frob_inner(const double[::1] x, const double[::1] y):
    """Sum of entrywise products, accumulated in long double."""
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t i, m4 = m - m % 4
    cdef long double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0
    with nogil:
        for i in range(0, m4, 4):
            a0 += <long double>x[i] * y[i]
            a1 += <long double>x[i + 1] * y[i + 1]
            a2 += <long double>x[i + 2] * y[i + 2]
            a3 += <long double>x[i + 3] * y[i + 3]
        for i in range(m4, m):
            a0 += <long double>x[i] * y[i]
    return <double>((a0 + a1) + (a2 + a3))


def axpy(double a, const double[::1] x, double[::1] y):
    """In place ``y += a * x``."""
    cdef Py_ssize_t i, m = x.shape[0]
    with nogil:
        for i in range(m):
            y[i] += a * x[i]


def csr_spmm(const int[::1] indptr, const int[::1] indices, const double[::1] data,
             const double[::1] x, double[::1] out, Py_ssize_t n, Py_ssize_t s):
    """``out = A @ X`` for CSR ``A`` (n x n) and column-major ``X`` (n x s)."""
    cdef Py_ssize_t i, j, p, off
    cdef double acc
    with nogil:
        for j in range(s):
            off = j * n
            for i in range(n):
                acc = 0.0
                for p in range(indptr[i], indptr[i + 1]):
                    acc = acc + data[p] * x[off + indices[p]]
                out[off + i] = acc


def sparse_sign_apply(const long long[::1] rows, const double[::1] vals, Py_ssize_t zeta,
                      const double[::1] x, double[::1] out,
                      Py_ssize_t n, Py_ssize_t s, Py_ssize_t ell):
    """``out = Theta @ X`` where column ``c`` of Theta has entries ``vals[c*zeta:(c+1)*zeta]``
    at rows ``rows[c*zeta:(c+1)*zeta]``. ``out`` must be zeroed by the caller."""
    cdef Py_ssize_t j, c, t, base, xo, oo
    cdef double xv
    with nogil:
        for j in range(s):
            xo = j * n
            oo = j * ell
            for c in range(n):
                xv = x[xo + c]
                base = c * zeta
                for t in range(zeta):
                    out[oo + rows[base + t]] += vals[base + t] * xv
