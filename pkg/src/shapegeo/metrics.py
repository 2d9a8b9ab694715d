"""Metric evaluation, adjoints of ``nabla P`` and the H / K metric gradients.

For curves (``m = 1``) the adjoint closed forms reduce as follows, with
``kappa = Tr^g S``, ``u_l = Delta^(i-l-1) h`` and ``v_l = Delta^l k``:

* ``Tr(g^-1 S g^-1 <nabla a, nabla b>) = kappa <nabla_th a, nabla_th b> / g``
* ``nabla^* <nabla a, b> = -(1/sqrt g) (<nabla_th a, b>/sqrt g)_theta``
* curvature sums: ``(R(nabla_th u, v) - R(u, nabla_th v)) f_theta / g``
* curvature-weighted first term: ``4 A kappa |kappa|^2 <h, k>``
* ``Tr^g R(Tf, kappa) Tf = -K kappa``

The tangential part of every adjoint is taken from :func:`adjoint_tangential`.

``H_gradient`` and ``K_gradient`` take ``form="closed"`` (closed-form bracket
followed by ``P^-1``) or ``form="discrete"`` (exact gradients of the
discrete metric, ``H = M^-1 grad_f <M h, k>`` and ``K = M^-1 (D_m M) h``).
"""

from __future__ import annotations

import numpy as np

from .calculus import d_theta
from .derivatives import covariant, geometry_tangent, laplacian_power_tangent, metric_apply_tangent, metric_gradient
from .errors import DomainError, SpecError, UnsupportedError
from .geometry import Immersion, check_field
from .metric_spec import CurvatureWeighted, MetricSpec
from .operators import assemble_P, laplacian
from .variations import nabla_theta, variation_laplacian_power, variation_mean_curvature

__all__ = [
    "eval_metric",
    "adjoint_tangential",
    "adjoint_laplacian_power",
    "adjoint_GA",
    "adjoint",
    "H_gradient",
    "K_gradient",
    "nablaP_pairing",
    "metric_operator_terms",
    "adjoint_identity_check",
]


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _col(a):
    return a[:, None]


def eval_metric(spec: MetricSpec, f: Immersion, h, k, handle=None) -> float:
    """``G_f(h, k) = sum_j <(W P h)_j, k_j>``."""
    h = check_field(f, h, "h")
    k = check_field(f, k, "k")
    P = handle if handle is not None else assemble_P(spec, f)
    return P.inner(h, k)


def metric_operator_terms(spec: MetricSpec, f: Immersion):
    """List of ``(Phi_i(Vol), Phi_i'(Vol), i)``; the curvature-weighted metric yields ``[]``."""
    if isinstance(spec, CurvatureWeighted):
        return []
    V = f.geometry.Vol
    return [(phi(V), phi.deriv(V), i) for phi, i in spec.terms()]


def _tangential_pointwise(f, h, k, Ph, Pk):
    """``(d_th <Ph, k> - <Ph, nabla_th k> - <nabla_th h, Pk>) / g``."""
    g = f.geometry.g
    return (
        d_theta(f.grid, _dot(Ph, k)) - _dot(Ph, nabla_theta(f, k)) - _dot(nabla_theta(f, h), Pk)
    ) / g


def adjoint_tangential(spec: MetricSpec, f: Immersion, h, k, power=None):
    """Coefficient (against ``d_theta``) of the tangential part of ``adj(nabla P)(h, k)``.

    Summed over the operator terms with their weights ``Phi_i(Vol)``, or for
    the single operator ``Delta^power`` (unweighted) when ``power`` is given.
    ``Delta^0 = Id`` does not depend on ``f`` and contributes zero.
    """
    h = check_field(f, h, "h")
    k = check_field(f, k, "k")
    if isinstance(spec, CurvatureWeighted):
        kap = f.geometry.traceS
        psi = _col(1 + spec.A * _dot(kap, kap))
        return _tangential_pointwise(f, h, k, psi * h, psi * k)
    items = [(1.0, power)] if power is not None else [(c, i) for c, _, i in metric_operator_terms(spec, f)]
    out = np.zeros(f.N, dtype=f.nodes.dtype)
    for c, i in items:
        if i == 0:
            continue
        Ph = _power(f, h, i)
        Pk = _power(f, k, i)
        out = out + c * _tangential_pointwise(f, h, k, Ph, Pk)
    return out


def _power(f, h, i):
    for _ in range(int(i)):
        h = laplacian(f, h)
    return h


def _codiff_scalar(f, omega):
    s = f.geometry.sqrt_g
    return -d_theta(f.grid, omega / s) / s


def adjoint_laplacian_power(f: Immersion, h, k, i: int, spec: MetricSpec | None = None):
    """Full adjoint ``adj(nabla Delta^i)(h, k)`` (normal closed form + tangential part)."""
    if int(i) != i or i < 0:
        raise SpecError(f"Laplacian power must be a nonnegative integer, got {i}")
    h = check_field(f, h, "h")
    k = check_field(f, k, "k")
    i = int(i)
    if i == 0:
        return np.zeros_like(h)
    geo = f.geometry
    amb = f.ambient
    g = geo.g
    kap = geo.traceS
    ft = geo.ftheta
    hp = [h]
    kp = [k]
    for _ in range(i):
        hp.append(laplacian(f, hp[-1]))
        kp.append(laplacian(f, kp[-1]))
    normal = np.zeros_like(h)
    for l in range(i):
        u = hp[i - l - 1]
        v = kp[l]
        nu = nabla_theta(f, u)
        nv = nabla_theta(f, v)
        scal = 2 * _dot(nu, nv) / g + _codiff_scalar(f, _dot(nu, v))
        normal = normal + _col(scal) * kap
        if not amb.flat:
            # sign fixed by pairing the curvature terms of (nabla_m Delta) by parts
            normal = normal + (amb.curvature(nu, v, ft) - amb.curvature(u, nv, ft)) / _col(g)
    normal = geo.normal_part(normal)
    tang = adjoint_tangential(spec, f, h, k, power=i)
    return normal + _col(tang) * ft


def adjoint_GA(f: Immersion, h, k, A: float):
    """Full adjoint of ``nabla P`` for ``P = 1 + A |Tr^g S|^2``."""
    h = check_field(f, h, "h")
    k = check_field(f, k, "k")
    if A == 0:
        return np.zeros_like(h)
    geo = f.geometry
    amb = f.ambient
    kap = geo.traceS
    hk = _dot(h, k)
    k2 = _dot(kap, kap)
    normal = 4 * A * _col(k2 * hk) * kap - 2 * A * laplacian(f, _col(hk) * kap)
    if not amb.flat:
        normal = normal + 2 * A * amb.sectional_curvature * _col(hk) * kap
    normal = geo.normal_part(normal)
    tang = adjoint_tangential(CurvatureWeighted(A), f, h, k)
    return normal + _col(tang) * geo.ftheta


def adjoint(spec: MetricSpec, f: Immersion, h, k):
    """``sum_i Phi_i(Vol) adj(nabla P_i)(h, k)`` for any supported spec."""
    if isinstance(spec, CurvatureWeighted):
        return adjoint_GA(f, h, k, spec.A)
    out = np.zeros_like(np.asarray(h))
    for c, _, i in metric_operator_terms(spec, f):
        if i:
            out = out + c * adjoint_laplacian_power(f, h, k, i, spec)
    return out


def nablaP_pairing(spec_or_power, f: Immersion, h, k, m) -> float:
    """Left side of the adjoint identity, ``int <(nabla_m P) h, k> vol``, from exact variations.

    ``spec_or_power`` is an integer ``i`` (``P = Delta^i``) or a
    :class:`CurvatureWeighted` spec.  Only the derivative of the operator
    enters, not that of the volume form or the weights.
    """
    geo = f.geometry
    dgeo = geometry_tangent(f, m)
    if isinstance(spec_or_power, CurvatureWeighted):
        kap = geo.traceS
        dk2 = 2 * spec_or_power.A * _dot(kap, dgeo.traceS)
        return float(np.sum(geo.w * dk2 * _dot(h, k)))
    _, dY = laplacian_power_tangent(f, dgeo, h, int(spec_or_power))
    return float(np.sum(geo.w[:, None] * covariant(f, dY) * k))


def _check_gradient_form(form):
    if form not in ("discrete", "closed"):
        raise DomainError(f"form must be 'discrete' or 'closed', got {form!r}")


def H_bracket(spec: MetricSpec, f: Immersion, h, k):
    """Bracket of the H-gradient before ``P^-1`` (closed form).

    ``sum_i Phi_i (adj_i^perp - (Phi_i'/Phi_i)(int <P_i h, k> vol) kappa
    - f_theta (<P_i h, nabla k> + <nabla h, P_i k>)/g - <P_i h, k> kappa)``
    """
    geo = f.geometry
    kap = geo.traceS
    ft = geo.ftheta
    g = geo.g
    nh = nabla_theta(f, h)
    nk = nabla_theta(f, k)
    if isinstance(spec, CurvatureWeighted):
        psi = 1 + spec.A * _dot(kap, kap)
        adj_n = geo.normal_part(adjoint_GA(f, h, k, spec.A))
        tang = psi * (_dot(h, nk) + _dot(nh, k)) / g
        return adj_n - _col(tang) * ft - _col(psi * _dot(h, k)) * kap
    out = np.zeros_like(h)
    for c, dc, i in metric_operator_terms(spec, f):
        Ph = _power(f, h, i)
        Pk = _power(f, k, i)
        pair = _dot(Ph, k)
        term = -(dc / c) * np.sum(geo.w * pair) * kap
        term = term - _col((_dot(Ph, nk) + _dot(nh, Pk)) / g) * ft - _col(pair) * kap
        if i:
            term = term + geo.normal_part(adjoint_laplacian_power(f, h, k, i, spec))
        out = out + c * term
    return out


def H_gradient(spec: MetricSpec, f: Immersion, h, k, form="closed", handle=None):
    """H-gradient, ``G(m, H(h, k)) = (nabla_m G)(h, k)``."""
    _check_gradient_form(form)
    h = check_field(f, h, "h")
    k = check_field(f, k, "k")
    P = handle if handle is not None else assemble_P(spec, f)
    if form == "discrete":
        if not f.ambient.flat:
            raise UnsupportedError("discrete H-gradient is implemented for flat ambients only")
        return P.solve_weighted(metric_gradient(spec, f, h, k))
    return P.solve(H_bracket(spec, f, h, k))


def K_bracket(spec: MetricSpec, f: Immersion, h, m):
    """Bracket of the K-gradient before ``P^-1`` (closed form).

    ``sum_i Phi_i (nabla_m P_i) h - (int <m, kappa> vol) sum_i Phi_i' P_i h
    + (<nabla_th m, f_theta>/g) P h``
    """
    geo = f.geometry
    kap = geo.traceS
    divm = _dot(nabla_theta(f, m), geo.ftheta) / geo.g
    if isinstance(spec, CurvatureWeighted):
        psi = 1 + spec.A * _dot(kap, kap)
        dk = variation_mean_curvature(f, m, form="closed")
        dpsi = 2 * spec.A * _dot(kap, dk)
        return _col(dpsi) * h + _col(divm * psi) * h
    mk = np.sum(geo.w * _dot(m, kap))
    out = np.zeros_like(h)
    for c, dc, i in metric_operator_terms(spec, f):
        Ph = _power(f, h, i)
        term = -mk * dc * Ph + c * _col(divm) * Ph
        if i:
            term = term + c * variation_laplacian_power(f, m, h, i, form="closed")
        out = out + term
    return out


def K_gradient(spec: MetricSpec, f: Immersion, h, m, form="closed", handle=None):
    """K-gradient, ``G(K(h, m), k) = (nabla_m G)(h, k)``."""
    _check_gradient_form(form)
    h = check_field(f, h, "h")
    m = check_field(f, m, "m")
    P = handle if handle is not None else assemble_P(spec, f)
    if form == "discrete":
        return P.solve_weighted(covariant(f, metric_apply_tangent(spec, f, m, h)))
    return P.solve(K_bracket(spec, f, h, m))


def adjoint_identity_check(op, f: Immersion, trials=20, seed=0, degree=3) -> dict:
    """Defining identity of ``adj(nabla P)`` on random triples ``(h, k, m)``.

    ``op`` is a Laplacian power ``i`` or a :class:`CurvatureWeighted` spec.
    Returns the pairings ``lhs = int <(nabla_m P) h, k> vol`` (exact discrete
    variation), ``rhs = int <m, adj(h, k)> vol`` and the aggregate
    ``discrepancy = ||lhs - rhs|| / ||lhs||`` over the trials.
    """
    from .samples import random_field

    rng = np.random.default_rng(seed)
    w = f.geometry.w[:, None]
    lhs, rhs = [], []
    for _ in range(trials):
        h = random_field(f, rng, degree=degree)
        k = random_field(f, rng, degree=degree)
        m = random_field(f, rng, degree=degree)
        lhs.append(nablaP_pairing(op, f, h, k, m))
        if isinstance(op, CurvatureWeighted):
            adj = adjoint_GA(f, h, k, op.A)
        else:
            adj = adjoint_laplacian_power(f, h, k, int(op))
        rhs.append(float(np.sum(w * m * adj)))
    lhs = np.array(lhs)
    rhs = np.array(rhs)
    return {"lhs": lhs, "rhs": rhs, "discrepancy": float(np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs))}
