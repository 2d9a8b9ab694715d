"""First variations of the induced geometry and their finite-difference harness.

Every variation has two implementations:

``form="discrete"`` (default)
    Exact derivative of the discrete quantity (forward mode, see
    :mod:`shapegeo.derivatives`).  It agrees with central differences up to
    the ``O(eps**2)`` truncation error.
``form="closed"``
    The closed-form continuous formula evaluated with the grid stencils.  It
    is consistent with the discrete route to ``O(N**-2)``.

For curves the closed forms reduce to (``a = <f_t, f_theta>/g``,
``f_t^perp = f_t - a f_theta``, ``kappa = S/g``, ``K`` the ambient curvature):

* ``Dg = -2 <f_t^perp, S> + a g_theta + 2 g a_theta``
* ``Dg^{-1} = 2 <f_t^perp, S>/g**2 - g**-2 (a g_theta + 2 g a_theta)``
* ``Dvol = (sqrt(g) a)_theta - <f_t^perp, kappa> sqrt(g)`` (coefficient of dtheta)
* ``D kappa = 2 <f_t^perp, kappa> kappa - Delta f_t^perp + K f_t^perp + a nabla_theta kappa``
* ``(nabla_{f_t} Delta) h = g**-2 Dg (nabla^2 h) + (Dg_theta/(2 g**2) - g_theta Dg/(2 g**3)) nabla_theta h
  + nabla^*(R(f_t, f_theta) h) - R(f_t, f_theta) nabla_theta h / g``

with ``nabla^2 h = nabla_theta nabla_theta h - (g_theta/(2g)) nabla_theta h`` and
``nabla^* omega = -(1/sqrt g) (omega/sqrt g)_theta`` on one-forms.  The closed
form of ``D kappa`` only determines the normal part; its tangential part
differs from the exact derivative, so callers compare normal components.

On the sphere every vector-valued variation is a covariant derivative: the
ambient derivative projected to the tangent space of the sphere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calculus import d_theta, second_difference
from .derivatives import covariant, geometry_tangent, laplacian_power_tangent
from .errors import DomainError
from .geometry import Immersion, check_field
from .operators import laplacian

__all__ = [
    "variation_pullback_metric",
    "variation_volume",
    "variation_mean_curvature",
    "variation_laplacian",
    "variation_laplacian_power",
    "VariationReport",
    "fd_check",
    "QUANTITIES",
    "nabla_theta",
]

EPS_FLOOR = 1e-14


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _col(a):
    return a[:, None]


def _check_form(form):
    if form not in ("discrete", "closed"):
        raise DomainError(f"form must be 'discrete' or 'closed', got {form!r}")


def nabla_theta(f: Immersion, h):
    """Covariant derivative ``nabla_theta h`` of a tangent field (centered stencil)."""
    return f.ambient.project(f.nodes, d_theta(f.grid, h))


def _nabla_theta_theta(f: Immersion, h):
    """``nabla_theta nabla_theta h``; on the sphere ``Pi(h_thth) + <h, f_th> f_th / R**2``."""
    geo = f.geometry
    out = f.ambient.project(f.nodes, second_difference(f.grid, h))
    if not f.ambient.flat:
        out = out + _col(_dot(h, geo.ftheta)) * geo.ftheta / f.ambient.radius**2
    return out


def _closed_parts(f: Immersion, f_t):
    geo = f.geometry
    a = _dot(f_t, geo.ftheta) / geo.g
    perp = f_t - _col(a) * geo.ftheta
    return geo, a, perp


def _lie_g(f, a):
    geo = f.geometry
    return a * d_theta(f.grid, geo.g) + 2 * geo.g * d_theta(f.grid, a)


def variation_pullback_metric(f: Immersion, f_t, form="discrete"):
    """Variation of the induced metric.

    Returns
    -------
    Dg, Dginv : (N,) arrays
        Derivatives of ``g`` and ``g^{-1}``; ``Dginv = -Dg/g**2`` holds nodewise.
    """
    _check_form(form)
    f_t = check_field(f, f_t, "f_t")
    if form == "discrete":
        d = geometry_tangent(f, f_t)
        return d.g, d.ginv
    geo, a, perp = _closed_parts(f, f_t)
    normal = 2 * _dot(perp, geo.S)
    lie = _lie_g(f, a)
    Dg = -normal + lie
    Dginv = normal / geo.g**2 - lie / geo.g**2
    return Dg, Dginv


def variation_volume(f: Immersion, f_t, form="discrete"):
    """Variation of the volume density (coefficient of dtheta) and the total volume."""
    _check_form(form)
    f_t = check_field(f, f_t, "f_t")
    geo = f.geometry
    if form == "discrete":
        d = geometry_tangent(f, f_t)
        dvol = d.sqrt_g
    else:
        _, a, perp = _closed_parts(f, f_t)
        dvol = d_theta(f.grid, geo.sqrt_g * a) - _dot(perp, geo.traceS) * geo.sqrt_g
    return dvol, geo.h * np.sum(dvol)


def variation_mean_curvature(f: Immersion, f_t, form="discrete"):
    """Covariant variation of the mean curvature vector ``Tr^g S``."""
    _check_form(form)
    f_t = check_field(f, f_t, "f_t")
    if form == "discrete":
        return covariant(f, geometry_tangent(f, f_t).traceS)
    geo, a, perp = _closed_parts(f, f_t)
    k = geo.traceS
    out = 2 * _col(_dot(perp, k)) * k - laplacian(f, perp)
    if not f.ambient.flat:
        out = out + f.ambient.sectional_curvature * perp
    return out + _col(a) * nabla_theta(f, k)


def _codifferential(f, omega):
    """``nabla^*`` of a vector-valued one-form given by its ``dtheta`` coefficient."""
    s = _col(f.geometry.sqrt_g)
    return -nabla_theta(f, omega / s) / s


def variation_laplacian(f: Immersion, f_t, h, form="discrete"):
    """Covariant derivative ``(nabla_{f_t} Delta) h``."""
    _check_form(form)
    f_t = check_field(f, f_t, "f_t")
    h = check_field(f, h, "h")
    if form == "discrete":
        return variation_laplacian_power(f, f_t, h, 1)
    geo = f.geometry
    amb = f.ambient
    g = geo.g
    Dg, _ = variation_pullback_metric(f, f_t, form="closed")
    gth = d_theta(f.grid, g)
    nh = nabla_theta(f, h)
    hess = _nabla_theta_theta(f, h) - _col(gth / (2 * g)) * nh
    coef = d_theta(f.grid, Dg) / (2 * g**2) - gth * Dg / (2 * g**3)
    out = _col(Dg / g**2) * hess + _col(coef) * nh
    if not amb.flat:
        ft = geo.ftheta
        out = out + _codifferential(f, amb.curvature(f_t, ft, h))
        out = out - amb.curvature(f_t, ft, nh) / _col(g)
    return out


def variation_laplacian_power(f: Immersion, f_t, h, i: int, form="discrete"):
    """Covariant derivative ``(nabla_{f_t} Delta^i) h``.

    The closed form uses the product rule over :func:`variation_laplacian`.
    """
    _check_form(form)
    f_t = check_field(f, f_t, "f_t")
    h = check_field(f, h, "h")
    if form == "discrete":
        dgeo = geometry_tangent(f, f_t)
        _, dY = laplacian_power_tangent(f, dgeo, h, i)
        return covariant(f, dY)
    powers = [h]
    for _ in range(int(i)):
        powers.append(laplacian(f, powers[-1]))
    out = np.zeros_like(h)
    for l in range(int(i)):
        term = variation_laplacian(f, f_t, powers[i - 1 - l], form="closed")
        for _ in range(l):
            term = laplacian(f, term)
        out = out + term
    return out


# ----------------------------------------------------------------------------
# finite-difference harness


def _q_g(f, h=None):
    return f.geometry.g


def _q_ginv(f, h=None):
    return 1 / f.geometry.g


def _q_vol(f, h=None):
    return f.geometry.sqrt_g


def _q_Vol(f, h=None):
    return f.geometry.Vol


def _q_traceS(f, h=None):
    return f.geometry.traceS


def _q_laplacian(f, h):
    return laplacian(f, f.ambient.project(f.nodes, h))


def _q_laplacian2(f, h):
    return laplacian(f, laplacian(f, f.ambient.project(f.nodes, h)))


def _a_g(f, f_t, h, form):
    return variation_pullback_metric(f, f_t, form)[0]


def _a_ginv(f, f_t, h, form):
    return variation_pullback_metric(f, f_t, form)[1]


def _a_vol(f, f_t, h, form):
    return variation_volume(f, f_t, form)[0]


def _a_Vol(f, f_t, h, form):
    return variation_volume(f, f_t, form)[1]


def _a_traceS(f, f_t, h, form):
    return variation_mean_curvature(f, f_t, form)


def _a_laplacian(f, f_t, h, form):
    return variation_laplacian(f, f_t, h, form)


def _a_laplacian2(f, f_t, h, form):
    return variation_laplacian_power(f, f_t, h, 2, form)


# name -> (quantity, analytic variation, needs h, vector valued)
QUANTITIES = {
    "g": (_q_g, _a_g, False, False),
    "ginv": (_q_ginv, _a_ginv, False, False),
    "vol": (_q_vol, _a_vol, False, False),
    "Vol": (_q_Vol, _a_Vol, False, False),
    "traceS": (_q_traceS, _a_traceS, False, True),
    "laplacian": (_q_laplacian, _a_laplacian, True, True),
    "laplacian2": (_q_laplacian2, _a_laplacian2, True, True),
}


@dataclass
class VariationReport:
    """Comparison of an analytic variation with central differences.

    ``rel_error = max|analytic - fd| / max(max|analytic|, EPS_FLOOR)``.
    ``order`` is ``log2(err(eps)/err(eps/2))``; it is ``inf`` when the
    central difference is exact to rounding (quantities quadratic in the
    nodes), and ``nan`` when only one step was evaluated.
    """

    quantity: str
    N: int
    eps: float
    analytic: np.ndarray
    fd: np.ndarray
    rel_error: float
    order: float = float("nan")
    rel_error_half: float = float("nan")
    form: str = "discrete"
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {
            "quantity": self.quantity,
            "N": self.N,
            "eps": self.eps,
            "rel_error": self.rel_error,
            "order_estimate": self.order,
        }


def _perturb(f: Immersion, f_t, eps):
    x = f.nodes + eps * f_t
    return f.with_nodes(f.ambient.retract(x))


def _sup(a):
    return float(np.max(np.abs(a)))


def fd_check(
    quantity: str,
    f: Immersion,
    f_t,
    eps=1e-5,
    h=None,
    form="discrete",
    orders=True,
    dtype=np.longdouble,
    seed=None,
) -> VariationReport:
    """Check an analytic variation against ``(Q(f + eps f_t) - Q(f - eps f_t))/(2 eps)``.

    The difference quotient is evaluated in ``dtype`` (extended precision by
    default) so that its ``O(eps**2)`` truncation error is visible above
    rounding.  On the sphere ``f +- eps f_t`` is retracted to the sphere and
    vector-valued results are projected to the tangent space at ``f``.

    Parameters
    ----------
    quantity : one of :data:`QUANTITIES`
    eps : float in [1e-8, 1e-2]
    h : tangent field, required for the Laplacian quantities
    orders : bool
        Also evaluate at ``eps/2`` and estimate the convergence order.
    """
    if quantity not in QUANTITIES:
        raise DomainError(f"unknown quantity {quantity!r}; choose from {sorted(QUANTITIES)}")
    if not 1e-8 <= eps <= 1e-2:
        raise DomainError(f"eps must lie in [1e-8, 1e-2], got {eps}")
    q, an, needs_h, vector = QUANTITIES[quantity]
    if needs_h and h is None:
        raise DomainError(f"quantity {quantity!r} needs a field h")
    f_t = check_field(f, f_t, "f_t")
    fx = f.with_nodes(np.asarray(f.nodes, dtype=dtype))
    ftx = np.asarray(f_t, dtype=dtype)
    hx = None if h is None else np.asarray(check_field(f, h, "h"), dtype=dtype)

    analytic = an(fx, ftx, hx, form)

    def fd_at(e):
        e = dtype(e)
        qp = q(_perturb(fx, ftx, e), hx)
        qm = q(_perturb(fx, ftx, -e), hx)
        d = (qp - qm) / (2 * e)
        if vector:
            d = fx.ambient.project(fx.nodes, d)
        return d

    scale = max(_sup(analytic), EPS_FLOOR)
    fd1 = fd_at(eps)
    err1 = _sup(analytic - fd1)
    rel1 = err1 / scale
    rep = VariationReport(quantity, f.N, eps, analytic, fd1, rel1, form=form, seed=seed)
    if orders:
        fd2 = fd_at(eps / 2)
        err2 = _sup(analytic - fd2)
        rep.rel_error_half = err2 / scale
        # rounding level of the difference quotient at step eps/2
        noise = 64 * np.finfo(dtype).eps * max(_sup(q(fx, hx)), EPS_FLOOR) / (eps / 2)
        if err1 <= noise and err2 <= noise:
            rep.order = float("inf")
        elif err2 == 0:
            rep.order = float("inf")
        else:
            rep.order = float(np.log2(err1 / err2))
        rep.extra["noise"] = float(noise)
    return rep
