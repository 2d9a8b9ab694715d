"""Backend selection for the banded kernels.

The compiled extension is used when it imports and the data is float64;
``SHAPEGEO_PURE_PYTHON=1`` forces the numpy fallback.  ``BACKEND`` names
the backend chosen at import.
"""

import os

import numpy as np

from . import _kernels_py

_compiled = None
if os.environ.get("SHAPEGEO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def _use_compiled(*arrays):
    return _compiled is not None and all(a.dtype == np.float64 for a in arrays)


def banded_matvec(bands, x):
    x = np.asarray(x)
    vec = x.ndim == 1
    x2 = x[:, None] if vec else x
    if _use_compiled(bands, x2):
        y = _compiled.banded_matvec(np.ascontiguousarray(bands), np.ascontiguousarray(x2))
    else:
        y = _kernels_py.banded_matvec(bands, x2)
    return y[:, 0] if vec else y


def banded_pcg(bands, rhs, tol, maxiter):
    rhs = np.asarray(rhs)
    vec = rhs.ndim == 1
    r2 = rhs[:, None] if vec else rhs
    if _use_compiled(bands, r2):
        x, it, res = _compiled.banded_pcg(
            np.ascontiguousarray(bands), np.ascontiguousarray(r2), float(tol), int(maxiter)
        )
    else:
        x, it, res = _kernels_py.banded_pcg(bands, r2, tol, maxiter)
    return (x[:, 0] if vec else x), it, res
