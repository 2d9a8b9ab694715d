"""Pure numpy versions of the compiled kernels (same storage convention).

These also serve non-double dtypes such as ``np.longdouble``.
"""

import numpy as np


def banded_matvec(bands, x):
    """Return ``A @ x`` for a periodic banded symmetric ``A``; ``x`` is (n, k)."""
    y = bands[0][:, None] * x
    for d in range(1, bands.shape[0]):
        b = bands[d][:, None]
        y += b * np.roll(x, -d, axis=0) + np.roll(b * x, d, axis=0)
    return y


def banded_pcg(bands, rhs, tol, maxiter):
    """Jacobi-preconditioned CG, all columns advanced together.

    A column stops updating once its residual falls under ``tol`` relative to
    its right-hand side.
    """
    dtype = np.result_type(bands, rhs)
    n, ncol = rhs.shape
    x = np.zeros((n, ncol), dtype=dtype)
    bn = np.sqrt(np.sum(rhs * rhs, axis=0))
    active = bn > 0
    dinv = (1 / bands[0])[:, None]
    r = rhs.astype(dtype, copy=True)
    z = dinv * r
    p = z.copy()
    rz = np.sum(r * z, axis=0)
    rn = bn.copy()
    it = 0
    safe_bn = np.where(active, bn, 1)
    while it < maxiter and np.any(active):
        q = banded_matvec(bands, p)
        pq = np.sum(p * q, axis=0)
        alpha = np.where(active, rz / np.where(active, pq, 1), 0)
        x += alpha * p
        r -= alpha * q
        rn = np.where(active, np.sqrt(np.sum(r * r, axis=0)), rn)
        it += 1
        active = active & (rn > tol * bn)
        z = dinv * r
        rz_new = np.sum(r * z, axis=0)
        beta = np.where(active, rz_new / np.where(rz != 0, rz, 1), 0)
        rz = rz_new
        p = z + beta * p
    relres = float(np.max(rn / safe_bn)) if ncol else 0.0
    return x, it, relres
