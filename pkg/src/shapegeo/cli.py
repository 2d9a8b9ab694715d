"""Command-line interface.

Exit codes: 0 success, 1 validation failure (bad arguments, inadmissible
input, or a check that did not pass), 2 numerical breakdown (degenerate
curve, solver failure), 3 file I/O or format error.

``SHAPEGEO_THREADS`` caps the worker threads used by batch checks.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .ambient import Euclidean, Sphere
from .errors import (
    DegenerateImmersionError,
    DomainError,
    FileFormatError,
    FlowBreakdownError,
    InputShapeError,
    LiftBreakdownError,
    SolverError,
    SpecError,
    UnsupportedError,
)
from .geometry import Immersion

__all__ = ["main", "run_command", "thread_count"]

DEFAULT_SEED = 0
VARIATION_ROWS = ("g", "ginv", "vol", "Vol", "traceS", "laplacian")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def thread_count() -> int:
    env = os.environ.get("SHAPEGEO_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise FileFormatError(f"cannot write {out}: {exc.strerror or exc}") from exc


def _ambient(name):
    return Sphere(1.0) if name == "sphere" else Euclidean(2)


# ---------------------------------------------------------------- commands


def cmd_shoot(a):
    from .geodesic import shoot_momentum, shoot_velocity

    spec = io.read_metric(a.metric)
    f0 = io.read_curve(a.curve)
    u0 = io.read_field(a.velocity, f0)
    steps = a.steps
    T = a.T
    if a.dt is not None and abs(a.dt * steps - T) > 1e-12 * max(1.0, T):
        raise DomainError(f"dt*steps = {a.dt * steps} does not match T = {T}")
    shoot = shoot_momentum if a.form == "momentum" else shoot_velocity
    kw = {"cg_tol": a.cg_tol, "solver": a.solver}
    try:
        path = shoot(spec, f0, u0, T, steps, gradients=a.gradients, record_every=a.record_every,
                     project_horizontal=a.project_horizontal, **kw)
        code = 0
    except FlowBreakdownError as exc:
        path = exc.path
        print(f"flow breakdown: {exc}", file=sys.stderr)
        code = 2
    chash = io.config_hash(spec.to_dict(), {k: v for k, v in vars(a).items() if k != "func"})
    diag = Path(a.out).with_suffix(".diagnostics.csv")
    io.write_csv(diag, *_diagnostic_table(path.diagnostics), chash)
    io.write_path(path, a.out, diagnostics_csv=diag.name)
    return code


def _diagnostic_table(records):
    cols = ["t", "energy"]
    rows = []
    flat = bool(records) and records[0].linear_momentum is not None
    if flat:
        n = len(records[0].linear_momentum)
        cols += [f"linear_{c}" for c in "xyz"[:n]]
        ang = np.atleast_1d(records[0].angular_momentum)
        cols += ["angular"] if ang.size == 1 else [f"angular_{c}" for c in "xyz"]
    cols += ["reparam_max_abs"]
    for r in records:
        row = [r.time, r.energy]
        if flat:
            row += list(r.linear_momentum) + list(np.atleast_1d(r.angular_momentum))
        row.append(float(np.max(np.abs(r.reparam_momentum))))
        rows.append(row)
    return cols, rows


def cmd_match(a):
    from .geodesic import match_bvp

    spec = io.read_metric(a.metric)
    f0 = io.read_curve(getattr(a, "from"))
    f1 = io.read_curve(a.to)
    path = match_bvp(spec, f0, f1, time_nodes=a.nodes, maxiter=a.maxiter)
    io.write_path(path, a.out)
    print(f"energy={path.info['energy']!r} converged={path.info['converged']} iterations={path.info['iterations']}")
    return 0


def cmd_lift(a):
    from .geodesic import horizontal_lift, horizontality_residual

    spec = io.read_metric(a.metric)
    path = io.read_path(a.path)
    lifted = horizontal_lift(spec, path, substeps=a.substeps)
    io.write_path(lifted, a.out)
    res = float(max(horizontality_residual(spec, c, v) for c, v in zip(lifted.curves, lifted.velocities)))
    print(f"horizontality_residual={res!r}")
    return 0


def cmd_check_variations(a):
    from .samples import random_field, random_immersion
    from .variations import fd_check

    amb = _ambient(a.ambient)
    tol = 1e-4 if amb.flat else 1e-3
    rng = np.random.default_rng(a.seed)
    f = random_immersion(a.N, rng, ambient=amb)
    f_t = random_field(f, rng)
    h = random_field(f, rng)

    def one(q):
        return fd_check(q, f, f_t, eps=a.eps, h=h, form=a.form, seed=a.seed)

    with ThreadPoolExecutor(max_workers=thread_count()) as ex:
        reps = list(ex.map(one, VARIATION_ROWS))
    rows = [[r.quantity, r.N, r.eps, r.rel_error, r.order] for r in reps]
    chash = io.config_hash("check-variations", a.seed, a.N, a.eps, a.ambient, a.form)
    _emit(io.write_csv(None, ["quantity", "N", "eps", "rel_error", "order_estimate"], rows, chash), a.out)
    print(f"seed={a.seed}", file=sys.stderr)
    return 0 if all(r.rel_error <= tol for r in reps) else 1


def cmd_check_adjoints(a):
    from .metric_spec import CurvatureWeighted
    from .metrics import adjoint_identity_check

    ops = [("Delta", 1), ("Delta2", 2), ("GA", CurvatureWeighted(a.A))]
    rows = []
    ok = True
    for N in (a.N, 2 * a.N):
        f = Immersion.circle(N) if a.ambient != "sphere" else Immersion.latitude(N, 0.5)
        for name, op in ops:
            r = adjoint_identity_check(op, f, trials=a.trials, seed=a.seed)
            rows.append([name, N, r["discrepancy"]])
    for k in range(len(ops)):
        d1, d2 = rows[k][2], rows[k + len(ops)][2]
        ok &= d1 <= a.tol and d1 / max(d2, 1e-300) >= 3.5
    chash = io.config_hash("check-adjoints", a.seed, a.N, a.trials, a.A, a.ambient)
    _emit(io.write_csv(None, ["operator", "N", "discrepancy"], rows, chash), a.out)
    return 0 if ok else 1


def cmd_check_invariants(a):
    from .invariants import conserved_quantities

    spec = io.read_metric(a.metric)
    path = io.read_path(a.path)
    recs = [conserved_quantities(spec, c, v, time=t) for t, c, v in zip(path.times, path.curves, path.velocities)]
    chash = io.config_hash("check-invariants", spec.to_dict(), Path(a.path).name)
    _emit(io.write_csv(None, *_diagnostic_table(recs), chash), a.out)
    return 0


def cmd_distance_bounds(a):
    from .invariants import distance_bound_check

    spec = io.read_metric(a.metric)
    path = io.read_path(a.path)
    rep = distance_bound_check(spec, path, a.condition, seed=a.seed)
    rows = [[r["name"], r["lhs"], r["rhs"], r["holds"]] for r in rep["rows"]]
    chash = io.config_hash("distance-bounds", spec.to_dict(), a.condition, Path(a.path).name)
    _emit(io.write_csv(None, ["inequality", "lhs", "rhs", "holds"], rows, chash), a.out)
    return 0 if rep["holds"] else 1


def cmd_spectrum(a):
    from .operators import laplacian_spectrum

    f = io.read_curve(a.curve) if a.curve else Immersion.circle(a.N)
    ev = laplacian_spectrum(f)
    chash = io.config_hash("spectrum", f.nodes.tolist() if a.curve else a.N)
    _emit(io.write_csv(None, ["index", "eigenvalue"], [[i, v] for i, v in enumerate(ev)], chash), a.out)
    return 0


def cmd_export_plot_data(a):
    path = io.read_path(a.path)
    n = path.ambient.dim
    cols = ["t", "j"] + list("xyz"[:n])
    rows = []
    for t, c in zip(path.times, path.curves):
        for j, x in enumerate(c.nodes):
            rows.append([t, j, *x])
    chash = io.config_hash("export-plot-data", Path(a.path).name)
    _emit(io.write_csv(None, cols, rows, chash), a.out)
    return 0


# ---------------------------------------------------------------- parser


def build_parser():
    p = _Parser(prog="shapegeo", description="Weighted Sobolev metrics on immersed closed curves.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("shoot", help="integrate a geodesic from an initial velocity")
    s.add_argument("--metric", required=True)
    s.add_argument("--curve", required=True)
    s.add_argument("--velocity", required=True)
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--steps", type=int, default=1000)
    s.add_argument("--dt", type=float, default=None)
    s.add_argument("--form", choices=["momentum", "velocity"], default="momentum")
    s.add_argument("--gradients", choices=["discrete", "closed"], default=None)
    s.add_argument("--project-horizontal", action="store_true")
    s.add_argument("--record-every", type=int, default=1)
    s.add_argument("--cg-tol", type=float, default=1e-12)
    s.add_argument("--solver", choices=["cg", "direct"], default="cg")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_shoot)

    s = sub.add_parser("match", help="geodesic between two curves by energy minimization")
    s.add_argument("--metric", required=True)
    s.add_argument("--from", required=True)
    s.add_argument("--to", required=True)
    s.add_argument("--nodes", type=int, default=32)
    s.add_argument("--maxiter", type=int, default=500)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_match)

    s = sub.add_parser("lift", help="horizontal lift of a path")
    s.add_argument("--metric", required=True)
    s.add_argument("--path", required=True)
    s.add_argument("--substeps", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_lift)

    s = sub.add_parser("check-variations", help="finite-difference check of the variation formulas")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--N", type=int, default=256)
    s.add_argument("--eps", type=float, default=1e-5)
    s.add_argument("--ambient", choices=["euclidean", "sphere"], default="euclidean")
    s.add_argument("--form", choices=["discrete", "closed"], default="discrete")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_check_variations)

    s = sub.add_parser("check-adjoints", help="adjoint identities for Delta, Delta^2 and G^A")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--N", type=int, default=256)
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--A", type=float, default=1.0)
    s.add_argument("--tol", type=float, default=2e-3)
    s.add_argument("--ambient", choices=["euclidean", "sphere"], default="euclidean")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_check_adjoints)

    s = sub.add_parser("check-invariants", help="conserved quantities along a path")
    s.add_argument("--path", required=True)
    s.add_argument("--metric", required=True)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_check_invariants)

    s = sub.add_parser("distance-bounds", help="geodesic distance lower-bound inequalities")
    s.add_argument("--path", required=True)
    s.add_argument("--metric", required=True)
    s.add_argument("--condition", type=int, choices=[1, 2, 3], default=2)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_distance_bounds)

    s = sub.add_parser("spectrum", help="eigenvalues of the discrete Laplacian")
    s.add_argument("--curve", default=None)
    s.add_argument("--N", type=int, default=64)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("export-plot-data", help="curve snapshots of a path as CSV")
    s.add_argument("--path", required=True)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_export_plot_data)
    return p


def run_command(argv) -> int:
    """Run one CLI command and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return int(args.func(args))
    except FileFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DegenerateImmersionError, SolverError, FlowBreakdownError, LiftBreakdownError) as exc:
        print(f"numerical breakdown: {exc}", file=sys.stderr)
        return 2
    except (DomainError, InputShapeError, SpecError, UnsupportedError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 1


def main(argv=None):
    sys.exit(run_command(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
