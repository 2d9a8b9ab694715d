"""Geodesic shooting, horizontal decomposition and lifting, and path matching.

Both integrators are fixed-step RK4.  The momentum form evolves
``(f, p)`` with ``p = W P f_t`` the weighted momentum density; the velocity
form evolves ``(f, f_t)`` with ``nabla_t f_t = H/2 - K``.

``gradients="discrete"`` (flat ambient) uses exact gradients of the
discrete metric, so the semi-discrete system is Hamiltonian with
Hamiltonian ``p^T M(f)^-1 p / 2``.  ``gradients="closed"`` evaluates the
closed-form right-hand sides pointwise; it is the only choice on the
sphere, where the integration runs in ambient coordinates with the
extrinsic terms ``-<p, f_t> f / R**2`` (momentum) or ``-|f_t|**2 f / R**2``
(velocity) and stage points are retracted onto the sphere.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.sparse
import scipy.sparse.linalg
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from . import kernels
from .derivatives import covariant, metric_apply_tangent, metric_gradient
from .errors import (
    DegenerateImmersionError,
    DomainError,
    FlowBreakdownError,
    LiftBreakdownError,
    SolverError,
    UnsupportedError,
)
from .geometry import Immersion, check_field
from .invariants import _record
from .metric_spec import MetricSpec
from .metrics import H_bracket, K_bracket
from .operators import CG_TOL, BlockBanded, OperatorHandle, assemble_P

__all__ = [
    "GeodesicPath",
    "momentum_density",
    "shoot_momentum",
    "shoot_velocity",
    "horizontal_decompose",
    "horizontality_residual",
    "horizontal_lift",
    "path_energy",
    "match_bvp",
]


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _col(a):
    return a[:, None]


@dataclass
class GeodesicPath:
    """Sampled path of immersions with velocities and momentum densities.

    Attributes
    ----------
    times : (T,) array, strictly increasing
    curves : list of Immersion
    velocities : list of (N, n) arrays
    momenta : list of (N, n) arrays or None
    diagnostics : list of ConservedRecord
    info : dict of run metadata
    """

    times: np.ndarray
    curves: list
    velocities: list
    momenta: list | None = None
    diagnostics: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.curves) or len(self.velocities) != len(self.curves):
            raise DomainError("path times, curves and velocities must be aligned")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("path times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def nodes(self) -> np.ndarray:
        """(T, N, n) array of nodal positions."""
        return np.stack([c.nodes for c in self.curves])

    @property
    def ambient(self):
        return self.curves[0].ambient


def momentum_density(spec: MetricSpec, f: Immersion, u, handle=None):
    """``p = W P u`` (weight folded in), so ``sum <p, h> = G_f(u, h)``."""
    u = check_field(f, u, "u")
    P = handle if handle is not None else assemble_P(spec, f)
    return P.apply_weighted(u)


def _resolve_gradients(f, gradients):
    if gradients is None:
        return "discrete" if f.ambient.flat else "closed"
    if gradients not in ("discrete", "closed"):
        raise DomainError(f"gradients must be 'discrete' or 'closed', got {gradients!r}")
    if gradients == "discrete" and not f.ambient.flat:
        raise UnsupportedError("discrete gradients are implemented for flat ambients only")
    return gradients


def _stage_curve(f0, x):
    amb = f0.ambient
    if not amb.flat:
        x = amb.retract(x)
    return Immersion(amb, x)


def _momentum_rhs(spec, f, p, gradients, solver_kw):
    P = assemble_P(spec, f, **solver_kw)
    amb = f.ambient
    if not amb.flat:
        p = amb.project(f.nodes, p)
    u = P.solve_weighted(p)
    if gradients == "discrete":
        dp = 0.5 * metric_gradient(spec, f, u, u)
    else:
        dp = 0.5 * _col(f.geometry.w) * H_bracket(spec, f, u, u)
        if not amb.flat:
            dp = amb.project(f.nodes, dp) - _col(_dot(p, u)) * f.nodes / amb.radius**2
    return u, dp, P


def _velocity_rhs(spec, f, u, gradients, solver_kw):
    P = assemble_P(spec, f, **solver_kw)
    amb = f.ambient
    if not amb.flat:
        u = amb.project(f.nodes, u)
    if gradients == "discrete":
        rhs = 0.5 * metric_gradient(spec, f, u, u) - covariant(f, metric_apply_tangent(spec, f, u, u))
        acc = P.solve_weighted(rhs)
    else:
        acc = P.solve(0.5 * H_bracket(spec, f, u, u) - K_bracket(spec, f, u, u))
        if not amb.flat:
            acc = acc - _col(_dot(u, u)) * f.nodes / amb.radius**2
    return u, acc, P


def _check_step_args(T, steps):
    if not (np.isfinite(T) and T > 0):
        raise DomainError(f"T must be positive, got {T}")
    if int(steps) != steps or steps < 1:
        raise DomainError(f"steps must be a positive integer, got {steps}")
    return float(T), int(steps)


def _shoot(spec, f0, u0, T, steps, form, gradients, project_horizontal, record_every, solver_kw):
    T, steps = _check_step_args(T, steps)
    u0 = check_field(f0, u0, "u0")
    gradients = _resolve_gradients(f0, gradients)
    amb = f0.ambient
    dt = T / steps
    rhs = _momentum_rhs if form == "momentum" else _velocity_rhs

    P0 = assemble_P(spec, f0, **solver_kw)
    if project_horizontal:
        u0 = horizontal_decompose(spec, f0, u0, handle=P0)[1]
    x = np.array(f0.nodes, dtype=float)
    y = P0.apply_weighted(u0) if form == "momentum" else np.array(u0, dtype=float)

    times, curves, vels, moms, diags = [], [], [], [], []

    def record(t, f, u, p):
        times.append(t)
        curves.append(f)
        vels.append(u)
        moms.append(p)
        diags.append(_record(f, u, p, t))

    def partial():
        return GeodesicPath(times, curves, vels, moms, diags, info=dict(info))

    info = {"form": form, "gradients": gradients, "dt": dt, "T": T, "steps": steps,
            "project_horizontal": bool(project_horizontal), "spec": spec.to_dict()}
    f = f0
    record(0.0, f0, u0, P0.apply_weighted(u0))
    for n in range(steps):
        try:
            def F(xs, ys):
                fs = _stage_curve(f0, xs)
                u, dy, _ = rhs(spec, fs, ys, gradients, solver_kw)
                return u, dy

            k1x, k1y = F(x, y)
            k2x, k2y = F(x + 0.5 * dt * k1x, y + 0.5 * dt * k1y)
            k3x, k3y = F(x + 0.5 * dt * k2x, y + 0.5 * dt * k2y)
            k4x, k4y = F(x + dt * k3x, y + dt * k3y)
            x = x + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
            y = y + dt / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
                raise DomainError("non-finite state")
            if not amb.flat:
                x = amb.retract(x)
                y = amb.project(x, y)
            f = Immersion(amb, x)
            P = assemble_P(spec, f, **solver_kw)
            if form == "momentum":
                u = P.solve_weighted(y)
                if project_horizontal:
                    u = horizontal_decompose(spec, f, u, handle=P)[1]
                    y = P.apply_weighted(u)
                p = y
            else:
                if project_horizontal:
                    y = horizontal_decompose(spec, f, y, handle=P)[1]
                u = y
                p = P.apply_weighted(u)
        except (DegenerateImmersionError, SolverError, DomainError) as exc:
            raise FlowBreakdownError(
                f"geodesic integration broke down at t={(n + 1) * dt:.6g}: {exc}", path=partial()
            ) from exc
        if (n + 1) % record_every == 0 or n + 1 == steps:
            record((n + 1) * dt, f, u, p)
    return partial()


def shoot_momentum(spec: MetricSpec, f0: Immersion, u0, T, steps, gradients=None,
                   project_horizontal=False, record_every=1, **solver_kw) -> GeodesicPath:
    """Integrate the geodesic equation in momentum form with RK4.

    Parameters
    ----------
    spec : MetricSpec
    f0 : Immersion
    u0 : (N, n) array
        Initial velocity (tangent to the sphere on a spherical ambient).
    T : float
        Final time.
    steps : int
        Number of RK4 steps, ``dt = T/steps``.
    gradients : {"discrete", "closed"}, optional
        Defaults to ``"discrete"`` for flat ambients and ``"closed"`` on the sphere.
    project_horizontal : bool
        Replace the velocity by its horizontal part after every step.
    record_every : int
        Store every ``record_every``-th state (the last one is always stored).
    **solver_kw
        Forwarded to :class:`OperatorHandle` (``cg_tol``, ``max_iter``, ``solver``).

    Raises
    ------
    FlowBreakdownError
        If the curve degenerates or a solve fails; ``exc.path`` holds the
        states computed so far.
    """
    return _shoot(spec, f0, u0, T, steps, "momentum", gradients, project_horizontal, record_every, solver_kw)


def shoot_velocity(spec: MetricSpec, f0: Immersion, u0, T, steps, gradients=None,
                   project_horizontal=False, record_every=1, **solver_kw) -> GeodesicPath:
    """Integrate ``nabla_t f_t = H(f_t, f_t)/2 - K(f_t, f_t)`` with RK4.

    Same parameters and errors as :func:`shoot_momentum`.
    """
    return _shoot(spec, f0, u0, T, steps, "velocity", gradients, project_horizontal, record_every, solver_kw)


def _vertical_blocks(M: BlockBanded, a, b):
    """Scalar banded matrix ``C[j, j+o] = a_j^T M[j, j+o] b_{j+o}``."""
    bb = M.bb
    out = np.zeros((2 * bb + 1, M.N, 1, 1))
    for o in range(-bb, bb + 1):
        bo = np.roll(b, -o, axis=0)
        blk = M.blocks[o + bb]
        if M.d == 1:
            out[o + bb, :, 0, 0] = blk[:, 0, 0] * _dot(a, bo)
        else:
            out[o + bb, :, 0, 0] = np.einsum("ja,jab,jb->j", a, blk, bo)
    return BlockBanded(out)


def _solve_vertical(P: OperatorHandle, B: BlockBanded, rhs):
    if P.solver == "direct":
        return scipy.sparse.linalg.spsolve(B.to_sparse(), rhs)
    bands = B.sym_bands()
    if bands is None:
        return np.linalg.solve(B.to_dense(), rhs)
    x, it, res = kernels.banded_pcg(bands, rhs, P.cg_tol, P.max_iter)
    if not res <= P.cg_tol:
        raise SolverError(f"vertical solve did not converge in {it} iterations (relative residual {res:.3e})",
                          residual=res)
    return x


def horizontal_decompose(spec: MetricSpec, f: Immersion, h, handle=None, shortcut=True):
    """Split ``h = Tf.ver + hor`` with ``hor`` G-orthogonal to all vertical fields.

    ``ver`` solves ``B ver = T^T M h`` with ``B = T^T M T`` and ``T a = a f_theta``,
    the discrete form of the tangential part of ``P`` restricted to vertical
    fields.  For order-zero metrics (``shortcut=True``) ``hor`` is the normal
    part of ``h`` and ``ver = <h, f_theta>/g``.

    Returns
    -------
    ver : (N,) array
    hor : (N, n) array
    """
    h = check_field(f, h, "h")
    geo = f.geometry
    ft = geo.ftheta
    P = handle if handle is not None else assemble_P(spec, f)
    if P.order_zero and shortcut:
        return _dot(h, ft) / geo.g, geo.normal_part(h)
    rhs = _dot(ft, P.apply_weighted(h))
    B = _vertical_blocks(P.matrix(), ft, ft)
    ver = _solve_vertical(P, B, rhs)
    return ver, h - _col(ver) * ft


def horizontality_residual(spec: MetricSpec, f: Immersion, v, handle=None) -> float:
    """``max_j |G(v, Tf.X_j)| / ||v||_G`` over the nodal hat fields ``X_j``."""
    v = check_field(f, v, "v")
    P = handle if handle is not None else assemble_P(spec, f)
    Mv = P.apply_weighted(v)
    norm = np.sqrt(max(float(np.sum(Mv * v)), 0.0))
    r = float(np.max(np.abs(_dot(Mv, f.geometry.ftheta))))
    return r / norm if norm > 0 else r


def _time_interpolant(times, X, V=None):
    T = len(times)
    Xf = X.reshape(T, -1)
    if V is not None:
        return CubicHermiteSpline(times, Xf, np.asarray(V).reshape(T, -1), axis=0)
    if T < 3:
        return CubicSpline(times, Xf, axis=0, bc_type="natural")
    return CubicSpline(times, Xf, axis=0)


def _periodic(values):
    N = values.shape[0]
    knots = np.linspace(0, 2 * np.pi, N + 1)
    return CubicSpline(knots, np.concatenate([values, values[:1]]), axis=0, bc_type="periodic")


def horizontal_lift(spec: MetricSpec, path, times=None, substeps=1, **solver_kw) -> GeodesicPath:
    """Reparametrize a path so that its velocity is horizontal at every time.

    The reparametrization ``phi(t)`` is carried at the nodes and the lifted
    curve is ``f(t, phi(t, theta_j))`` from cubic interpolation (periodic in
    ``theta``, Hermite or cubic in ``t``).  Its velocity
    ``f_t(phi) + f_theta(phi) phi_t`` is made discretely horizontal at the
    lifted curve by solving for ``phi_t``; ``phi`` is advanced with RK4.

    Parameters
    ----------
    path : GeodesicPath or sequence of Immersion
        A raw sequence needs ``times``.
    substeps : int
        RK4 steps per sampling interval.

    Raises
    ------
    LiftBreakdownError
        If the nodal values of ``phi`` stop being increasing mod ``2 pi``.
    """
    if isinstance(path, GeodesicPath):
        curves = path.curves
        times = path.times
        V = np.stack(path.velocities)
    else:
        curves = list(path)
        if times is None:
            raise DomainError("raw paths need explicit times")
        V = None
    times = np.asarray(times, dtype=float)
    if len(times) != len(curves) or len(times) < 2:
        raise DomainError("need at least 2 aligned samples to lift a path")
    amb = curves[0].ambient
    N = curves[0].N
    n = amb.dim
    X = np.stack([c.nodes for c in curves]).astype(float)
    S = _time_interpolant(times, X, V)
    St = S.derivative()
    theta = curves[0].grid.nodes

    def evaluate(t, phi):
        x = S(t).reshape(N, n)
        xt = St(t).reshape(N, n)
        sx = _periodic(x)
        st = _periodic(xt)
        pos = sx(np.mod(phi, 2 * np.pi))
        a = st(np.mod(phi, 2 * np.pi))
        b = sx(np.mod(phi, 2 * np.pi), 1)
        if not amb.flat:
            r = np.linalg.norm(pos, axis=1, keepdims=True)
            xh = pos / r
            pos = amb.radius * xh
            a = amb.radius / r * (a - _col(_dot(a, xh)) * xh)
            b = amb.radius / r * (b - _col(_dot(b, xh)) * xh)
        ft = Immersion(amb, pos)
        P = assemble_P(spec, ft, **solver_kw)
        T_ = ft.geometry.ftheta
        C = _vertical_blocks(P.matrix(), T_, b)
        rhs = -_dot(T_, P.apply_weighted(a))
        if C.bb == 0:
            phit = rhs / C.blocks[0, :, 0, 0]
        else:
            phit = scipy.sparse.linalg.spsolve(C.to_sparse(), rhs)
        return phit, ft, a + _col(phit) * b

    def check(phi, t):
        d = np.diff(np.append(phi, phi[0] + 2 * np.pi))
        if np.any(d <= 0):
            raise LiftBreakdownError(f"reparametrization lost monotonicity at t={t:.6g}")

    phi = theta.copy()
    phis = [phi.copy()]
    _, f_, v_ = evaluate(times[0], phi)
    out_c, out_v = [f_], [v_]
    for k in range(len(times) - 1):
        t0, t1 = times[k], times[k + 1]
        dt = (t1 - t0) / substeps
        for s in range(substeps):
            t = t0 + s * dt
            k1 = evaluate(t, phi)[0]
            k2 = evaluate(t + dt / 2, phi + dt / 2 * k1)[0]
            k3 = evaluate(t + dt / 2, phi + dt / 2 * k2)[0]
            k4 = evaluate(t + dt, phi + dt * k3)[0]
            phi = phi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            check(phi, t + dt)
        _, f_, v_ = evaluate(t1, phi)
        out_c.append(f_)
        out_v.append(v_)
        phis.append(phi.copy())
    return GeodesicPath(times, out_c, out_v, None, [], info={"phi": np.stack(phis), "lifted": True})


def path_energy(spec: MetricSpec, X, ambient=None, T=1.0, gradient=True):
    """Discrete path energy and its gradient with respect to all nodes.

    ``E = sum_k dt/2 * G_{f_{k+1/2}}(d_k, d_k)`` with ``d_k = (f_{k+1} - f_k)/dt``
    and ``f_{k+1/2}`` the nodal midpoint.

    Parameters
    ----------
    X : (K+1, N, n) array
        Nodal positions at ``K+1`` equally spaced times on ``[0, T]``.

    Returns
    -------
    E : float
    grad : (K+1, N, n) array or None
    """
    from .ambient import Euclidean

    X = np.asarray(X, dtype=float)
    amb = ambient or Euclidean(X.shape[2])
    if not amb.flat:
        raise UnsupportedError("path energy is implemented for flat ambients only")
    K = X.shape[0] - 1
    dt = T / K
    E = 0.0
    grad = np.zeros_like(X) if gradient else None
    for k in range(K):
        mid = Immersion(amb, 0.5 * (X[k] + X[k + 1]))
        d = (X[k + 1] - X[k]) / dt
        P = assemble_P(spec, mid)
        Md = P.apply_weighted(d)
        E += 0.5 * dt * float(np.sum(Md * d))
        if gradient:
            gm = 0.25 * dt * metric_gradient(spec, mid, d, d)
            grad[k] += gm - Md
            grad[k + 1] += gm + Md
    return E, grad


def match_bvp(spec: MetricSpec, f0: Immersion, f1: Immersion, time_nodes=32, maxiter=500,
              initial=None) -> GeodesicPath:
    """Geodesic between ``f0`` and ``f1`` by minimizing the discrete path energy.

    L-BFGS over the interior nodes with the exact gradient of
    :func:`path_energy`; stops when the gradient norm is below
    ``1e-8 * max(1, E)`` or after ``maxiter`` iterations.  The result's
    ``info`` holds ``energy``, ``converged``, ``iterations`` and ``grad_norm``;
    a ``RuntimeWarning`` is emitted when not converged.
    """
    if not (f0.ambient.flat and f1.ambient.flat):
        raise UnsupportedError("boundary value matching is implemented for flat ambients only")
    if f0.nodes.shape != f1.nodes.shape:
        raise DomainError("endpoint curves must have the same shape")
    K = int(time_nodes) - 1
    if K < 1:
        raise DomainError("need at least 2 time nodes")
    amb = f0.ambient
    s = np.linspace(0, 1, K + 1)[:, None, None]
    X = (1 - s) * f0.nodes + s * f1.nodes if initial is None else np.array(initial, dtype=float)
    shape = X[1:-1].shape

    def fun(z):
        X[1:-1] = z.reshape(shape)
        try:
            E, g = path_energy(spec, X, amb)
        except DegenerateImmersionError:
            return np.inf, np.zeros_like(z)
        return E, g[1:-1].ravel()

    E0, g0 = fun(X[1:-1].ravel())
    state = {"E": E0, "g": g0}

    def fun_track(z):
        E, g = fun(z)
        state["E"], state["g"] = E, g
        return E, g

    def stop(intermediate_result):
        if np.linalg.norm(state["g"]) <= 1e-8 * max(1.0, state["E"]):
            raise StopIteration

    converged = np.linalg.norm(g0) <= 1e-8 * max(1.0, E0)
    it = 0
    if not converged and K > 1:
        res = scipy.optimize.minimize(
            fun_track, X[1:-1].ravel(), jac=True, method="L-BFGS-B", callback=stop,
            options={"maxiter": maxiter, "maxcor": 20, "ftol": 0.0, "gtol": 0.0},
        )
        X[1:-1] = res.x.reshape(shape)
        it = int(res.nit)
    E, g = path_energy(spec, X, amb)
    gn = float(np.linalg.norm(g[1:-1]))
    converged = gn <= 1e-8 * max(1.0, E)
    if not converged:
        warnings.warn(f"path matching stopped with gradient norm {gn:.3e}", RuntimeWarning, stacklevel=2)
    times = np.linspace(0, 1, K + 1)
    curves = [Immersion(amb, x) for x in X]
    vel = list(np.gradient(X, times, axis=0, edge_order=2))
    return GeodesicPath(times, curves, vel, None, [],
                        info={"energy": E, "converged": converged, "iterations": it, "grad_norm": gn})
