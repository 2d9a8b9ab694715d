# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for periodic banded symmetric systems.

Storage: ``bands[d, j] = A[j, (j + d) % n]`` for ``d = 0..b``; the lower
half follows from symmetry.  Requires ``n >= 2*b + 1`` so that no entry is
stored twice.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


cdef void _matvec(const double[:, ::1] bands, const double[:, ::1] x,
                  double[:, ::1] y) noexcept nogil:
    cdef Py_ssize_t nb = bands.shape[0]
    cdef Py_ssize_t n = bands.shape[1]
    cdef Py_ssize_t ncol = x.shape[1]
    cdef Py_ssize_t j, d, c, jd
    cdef double a
    for j in range(n):
        a = bands[0, j]
        for c in range(ncol):
            y[j, c] = a * x[j, c]
    for d in range(1, nb):
        for j in range(n):
            jd = j + d
            if jd >= n:
                jd -= n
            a = bands[d, j]
            for c in range(ncol):
                y[j, c] += a * x[jd, c]
                y[jd, c] += a * x[j, c]


def banded_matvec(double[:, ::1] bands, double[:, ::1] x):
    """Return ``A @ x`` for a periodic banded symmetric ``A``; ``x`` is (n, k)."""
    y = np.empty((x.shape[0], x.shape[1]), dtype=np.float64)
    cdef double[:, ::1] yv = y
    with nogil:
        _matvec(bands, x, yv)
    return y


def banded_pcg(double[:, ::1] bands, double[:, ::1] rhs, double tol, Py_ssize_t maxiter):
    """Jacobi-preconditioned CG, one independent run per column of ``rhs``.

    Returns
    -------
    x : (n, k) array
    iterations : int, maximum over columns
    relres : float, maximum relative residual over columns
    """
    cdef Py_ssize_t n = rhs.shape[0]
    cdef Py_ssize_t ncol = rhs.shape[1]
    cdef Py_ssize_t j, c, it, itmax = 0
    cdef double rz, rz_new, pq, alpha, beta, rn, bn, worst = 0.0

    x = np.zeros((n, ncol), dtype=np.float64)
    cdef double[:, ::1] X = x
    cdef double[:, ::1] r = np.empty((n, 1), dtype=np.float64)
    cdef double[:, ::1] z = np.empty((n, 1), dtype=np.float64)
    cdef double[:, ::1] p = np.empty((n, 1), dtype=np.float64)
    cdef double[:, ::1] q = np.empty((n, 1), dtype=np.float64)
    cdef double[::1] dinv = np.empty(n, dtype=np.float64)

    for j in range(n):
        dinv[j] = 1.0 / bands[0, j]

    with nogil:
        for c in range(ncol):
            bn = 0.0
            for j in range(n):
                r[j, 0] = rhs[j, c]
                bn += rhs[j, c] * rhs[j, c]
            bn = sqrt(bn)
            if bn == 0.0:
                continue
            rz = 0.0
            for j in range(n):
                z[j, 0] = dinv[j] * r[j, 0]
                p[j, 0] = z[j, 0]
                rz += r[j, 0] * z[j, 0]
            rn = bn
            it = 0
            while it < maxiter:
                _matvec(bands, p, q)
                pq = 0.0
                for j in range(n):
                    pq += p[j, 0] * q[j, 0]
                alpha = rz / pq
                rn = 0.0
                for j in range(n):
                    X[j, c] += alpha * p[j, 0]
                    r[j, 0] -= alpha * q[j, 0]
                    rn += r[j, 0] * r[j, 0]
                rn = sqrt(rn)
                it += 1
                if rn <= tol * bn:
                    break
                rz_new = 0.0
                for j in range(n):
                    z[j, 0] = dinv[j] * r[j, 0]
                    rz_new += r[j, 0] * z[j, 0]
                beta = rz_new / rz
                rz = rz_new
                for j in range(n):
                    p[j, 0] = z[j, 0] + beta * p[j, 0]
            if it > itmax:
                itmax = it
            if rn / bn > worst:
                worst = rn / bn
    return x, itmax, worst
