"""Compare the compiled and pure-numpy banded kernels.

Run with ``python benchmarks/bench_kernels.py``.  Times one matrix-vector
product and one preconditioned CG solve of a Sobolev metric system per
backend and grid size, and checks that both backends agree.
"""

import argparse
import time

import numpy as np

from shapegeo import _kernels_py
from shapegeo.geometry import Immersion
from shapegeo.metric_spec import ScaleInvariantSobolev
from shapegeo.operators import assemble_P

try:
    from shapegeo import _kernels as _compiled
except ImportError:
    _compiled = None


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(N, p, repeat):
    f = Immersion.circle(N, radius=1.3)
    th = f.grid.nodes
    f = f.with_nodes(f.nodes * (1 + 0.2 * np.cos(3 * th))[:, None])
    bands = assemble_P(ScaleInvariantSobolev(p), f).matrix().sym_bands()
    rng = np.random.default_rng(0)
    rhs = rng.standard_normal((bands.shape[1], 2))
    rows = []
    backends = [("python", _kernels_py)]
    if _compiled is not None:
        backends.append(("cython", _compiled))
    ref = None
    for name, mod in backends:
        t_mv, _ = _best(lambda: mod.banded_matvec(bands, rhs), repeat)
        t_cg, (x, it, res) = _best(lambda: mod.banded_pcg(bands, rhs, 1e-12, 50 * N), repeat)
        if ref is None:
            ref = x
        diff = float(np.max(np.abs(x - ref)) / np.max(np.abs(ref)))
        rows.append((name, N, p, t_mv * 1e6, t_cg * 1e3, it, res, diff))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512, 1024])
    ap.add_argument("--p", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    print(f"{'backend':8s} {'N':>6s} {'p':>2s} {'matvec[us]':>11s} {'pcg[ms]':>9s} {'iters':>6s} {'relres':>9s} {'diff':>9s}")
    for N in a.sizes:
        for r in bench(N, a.p, a.repeat):
            print(f"{r[0]:8s} {r[1]:6d} {r[2]:2d} {r[3]:11.1f} {r[4]:9.2f} {r[5]:6d} {r[6]:9.1e} {r[7]:9.1e}")


if __name__ == "__main__":
    main()
