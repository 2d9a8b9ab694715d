"""Exact derivatives of the discrete geometry with respect to the nodes.

Forward mode differentiates every discrete quantity along a node
perturbation ``m`` (ambient derivative of ``Q(f + eps*m)``; on the sphere
the retraction ``R(f + eps*m)/|f + eps*m|`` has the same first derivative
because ``m`` is tangent).  Tangent fields carried along the perturbation
are kept tangent by projection, ``h_eps = Pi_{f_eps} h``, which is parallel
to first order.

Reverse mode (flat ambient) returns the node gradient of the discrete metric
``sum_j <(M h)_j, k_j>`` for fixed fields ``h, k``.  Together these make the
semi-discrete geodesic equations an exact Hamiltonian system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import d_theta, forward_difference, forward_difference_adjoint, second_difference
from .errors import UnsupportedError
from .geometry import Immersion
from .metric_spec import CurvatureWeighted, MetricSpec

__all__ = [
    "GeometryTangent",
    "geometry_tangent",
    "laplacian_raw",
    "laplacian_tangent",
    "laplacian_power_tangent",
    "metric_apply_tangent",
    "metric_gradient",
    "covariant",
]


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _col(a):
    return a[:, None]


def _dproj(amb, x, xdot, v):
    if amb.flat:
        return np.zeros_like(v)
    return amb.dproject(x, xdot, v)


@dataclass
class GeometryTangent:
    """Directional derivatives of the :class:`GeometryCache` fields along ``m``.

    Vector-valued entries are ambient derivatives; use ``covariant`` to
    project them to the tangent space of the ambient at the nodes.
    """

    m: np.ndarray
    ftheta: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    sqrt_g: np.ndarray
    w: np.ndarray
    Vol: float
    unit_tangent: np.ndarray
    S: np.ndarray
    traceS: np.ndarray
    edge_speed: np.ndarray
    edge_foot: np.ndarray | None


def geometry_tangent(f: Immersion, m) -> GeometryTangent:
    """Forward-mode derivative of the induced geometry along ``m``."""
    geo = f.geometry
    amb = f.ambient
    grid = f.grid
    x = f.nodes
    m = np.asarray(m)

    Dx = d_theta(grid, x)
    dft = amb.project(x, d_theta(grid, m)) + _dproj(amb, x, m, Dx)
    tau = geo.unit_tangent
    dsq = _dot(tau, dft)
    dg = 2 * geo.sqrt_g * dsq
    dtau = (dft - _col(_dot(dft, tau)) * tau) / _col(geo.sqrt_g)

    d2x = second_difference(grid, x)
    acc = amb.project(x, d2x)
    dacc = amb.project(x, second_difference(grid, m)) + _dproj(amb, x, m, d2x)
    dS = (
        dacc
        - _col(_dot(dacc, tau) + _dot(acc, dtau)) * tau
        - _col(_dot(acc, tau)) * dtau
    )
    dk = dS / _col(geo.g) - geo.S * _col(dg / geo.g**2)

    dm = forward_difference(grid, m)
    des = _dot(geo.edge_vec, dm) / geo.edge_speed
    if amb.flat:
        dfoot = None
    else:
        u = x + np.roll(x, -1, axis=0)
        du = m + np.roll(m, -1, axis=0)
        nu = np.linalg.norm(u, axis=1)
        uh = u / _col(nu)
        dfoot = amb.radius * (du - _col(_dot(du, uh)) * uh) / _col(nu)

    return GeometryTangent(
        m=m,
        ftheta=dft,
        g=dg,
        ginv=-dg / geo.g**2,
        sqrt_g=dsq,
        w=geo.h * dsq,
        Vol=geo.h * np.sum(dsq),
        unit_tangent=dtau,
        S=dS,
        traceS=dk,
        edge_speed=des,
        edge_foot=dfoot,
    )


def covariant(f: Immersion, v):
    """Project an ambient derivative to the ambient tangent space at the nodes."""
    return f.ambient.project(f.nodes, v)


def laplacian_raw(f: Immersion, Y):
    """Weak-form Laplacian formula applied to any ambient-valued nodal field."""
    geo = f.geometry
    amb = f.ambient
    dY = forward_difference(f.grid, Y)
    if not amb.flat:
        dY = amb.project(geo.edge_foot, dY)
    q = dY / _col(geo.edge_speed)
    r = np.roll(q, 1, axis=0) - q
    if not amb.flat:
        r = amb.project(f.nodes, r)
    return r / _col(geo.w)


def laplacian_tangent(f: Immersion, dgeo: GeometryTangent, Y, dY):
    """Derivative of ``Delta_{f_eps}(Y_eps)`` given ``Y`` and its derivative ``dY``."""
    geo = f.geometry
    amb = f.ambient
    grid = f.grid
    m = dgeo.m
    s = _col(geo.edge_speed)
    dY_e = forward_difference(grid, Y)
    ddY_e = forward_difference(grid, dY)
    if amb.flat:
        P = dY_e
        dP = ddY_e
    else:
        xe = geo.edge_foot
        P = amb.project(xe, dY_e)
        dP = amb.dproject(xe, dgeo.edge_foot, dY_e) + amb.project(xe, ddY_e)
    q = P / s
    dq = dP / s - q * _col(dgeo.edge_speed) / s
    r = np.roll(q, 1, axis=0) - q
    dr = np.roll(dq, 1, axis=0) - dq
    if amb.flat:
        L = r
        dL = dr
    else:
        x = f.nodes
        L = amb.project(x, r)
        dL = amb.dproject(x, m, r) + amb.project(x, dr)
    w = _col(geo.w)
    return dL / w - (L / w) * _col(dgeo.w) / w


def _transported(f, dgeo, h):
    """``Y_0 = Pi h`` and its derivative along the perturbation."""
    amb = f.ambient
    if amb.flat:
        return h, np.zeros_like(h)
    return amb.project(f.nodes, h), amb.dproject(f.nodes, dgeo.m, h)


def laplacian_power_tangent(f: Immersion, dgeo: GeometryTangent, h, i: int):
    """Derivative of ``Delta^i h`` (``h`` held parallel); returns ``(Delta^i h, derivative)``."""
    Y, dY = _transported(f, dgeo, h)
    for _ in range(int(i)):
        Y, dY = laplacian_raw(f, Y), laplacian_tangent(f, dgeo, Y, dY)
    return Y, dY


def metric_apply_tangent(spec: MetricSpec, f: Immersion, m, h, dgeo=None):
    """Ambient derivative of ``M(f) h`` along ``m`` with ``h`` held parallel.

    ``M h = w * P h`` is the momentum density.  On the sphere the returned
    value should be projected (see :func:`covariant`) before use as a
    covariant derivative.
    """
    geo = f.geometry
    if dgeo is None:
        dgeo = geometry_tangent(f, m)
    w = _col(geo.w)
    dw = _col(dgeo.w)
    if isinstance(spec, CurvatureWeighted):
        Y, dY = _transported(f, dgeo, h)
        k = geo.traceS
        psi = 1 + spec.A * _dot(k, k)
        dpsi = 2 * spec.A * _dot(k, dgeo.traceS)
        return (dw * _col(psi) + w * _col(dpsi)) * Y + w * _col(psi) * dY
    V = geo.Vol
    dV = dgeo.Vol
    out = 0
    cache = {}
    for phi, i in spec.terms():
        if i not in cache:
            cache[i] = laplacian_power_tangent(f, dgeo, h, i)
        Y, dY = cache[i]
        out = out + phi.deriv(V) * dV * w * Y + phi(V) * (dw * Y + w * dY)
    return out


def _vol_gradient(f):
    geo = f.geometry
    return -geo.h * d_theta(f.grid, geo.unit_tangent)


def metric_gradient(spec: MetricSpec, f: Immersion, h, k):
    """Node gradient of ``Q(f) = sum_j <(M(f) h)_j, k_j>`` for fixed ``h, k`` (flat only).

    Returns
    -------
    (N, n) array ``grad`` with ``dQ = sum_j <grad_j, m_j>``.
    """
    if not f.ambient.flat:
        raise UnsupportedError("discrete metric gradient is implemented for flat ambients only")
    geo = f.geometry
    grid = f.grid
    hh = geo.h
    tau = geo.unit_tangent
    tau_e = geo.edge_vec / _col(geo.edge_speed)
    hk = _dot(h, k)

    if isinstance(spec, CurvatureWeighted):
        A = spec.A
        a = d_theta(grid, f.nodes)
        b = second_difference(grid, f.nodes)
        aa = _dot(a, a)
        bb = _dot(b, b)
        ab = _dot(a, b)
        X = aa * bb - ab**2
        k2 = X / aa**3
        cw = (1 + A * k2) * hk
        ck = A * geo.w * hk
        da = (2 * _col(bb) * a - 2 * _col(ab) * b) / _col(aa**3) - 6 * _col(X / aa**4) * a
        db = (2 * _col(aa) * b - 2 * _col(ab) * a) / _col(aa**3)
        grad = -hh * d_theta(grid, _col(cw) * tau)
        grad = grad - d_theta(grid, _col(ck) * da) + second_difference(grid, _col(ck) * db)
        return grad

    V = geo.Vol
    terms = spec.terms()
    pmax = max(i for _, i in terms)
    # u_a = Delta^a h, v_b = Delta^b k
    u = [h]
    v = [k]
    for _ in range(pmax):
        u.append(laplacian_raw(f, u[-1]))
        v.append(laplacian_raw(f, v[-1]))
    du = [forward_difference(grid, x) for x in u]
    dv = [forward_difference(grid, x) for x in v]

    cw = np.zeros_like(geo.w)
    cs = np.zeros_like(geo.edge_speed)
    dvol_coef = 0.0
    for phi, i in terms:
        c = phi(V)
        if i == 0:
            cw = cw + c * hk
            Qi = np.sum(geo.w * hk)
        else:
            for r in range(1, i):
                cw = cw - c * _dot(u[r], v[i - r])
            acc = 0
            for r in range(1, i + 1):
                acc = acc + _dot(du[r - 1], dv[i - r])
            cs = cs - c * hh / geo.edge_speed**2 * acc
            # Q_i = h^T L (W^-1 L)^{i-1} k = sum_e (h/s_e) <d u_{i-1}, d k>
            Qi = np.sum(hh / geo.edge_speed * _dot(du[i - 1], dv[0]))
        dvol_coef = dvol_coef + phi.deriv(V) * Qi
    grad = -hh * d_theta(grid, _col(cw) * tau)
    grad = grad + forward_difference_adjoint(grid, _col(cs) * tau_e)
    grad = grad + dvol_coef * _vol_gradient(f)
    return grad
