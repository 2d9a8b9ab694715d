"""Conserved quantities along geodesics, scale checks and distance bounds.

Momenta are evaluated from the weighted momentum density ``p = W P f_t``:

* linear momentum ``sum_j p_j`` (Euclidean ambient),
* angular momentum ``sum_j f_j ^ p_j`` (scalar for n = 2, vector for n = 3),
* reparametrization momentum density ``<p_j, f_theta_j>``, the pairing of
  ``f_t`` with the vertical field ``Tf.X_j`` for the nodal hat basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UnsupportedError
from .geometry import Immersion, check_field
from .metric_spec import Conformal, CurvatureWeighted, MetricSpec, Power, ScaleInvariantSobolev, Constant, WeightedSobolev
from .metrics import eval_metric
from .operators import assemble_P

__all__ = [
    "EPS_FLOOR",
    "ConservedRecord",
    "conserved_quantities",
    "conservation_drift",
    "path_length",
    "area_swept",
    "vol_lipschitz_check",
    "distance_bound_check",
    "known_constants",
    "scale_invariance_check",
]

EPS_FLOOR = 1e-14


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _wedge(x, p):
    if x.shape[-1] == 2:
        return x[..., 0] * p[..., 1] - x[..., 1] * p[..., 0]
    return np.cross(x, p)


@dataclass
class ConservedRecord:
    """Momenta and kinetic energy at one time.

    ``scales`` holds, per quantity, the sum of the magnitudes of the
    integrand; it is the natural size of a quantity whose value vanishes by
    symmetry.
    """

    time: float
    energy: float
    linear_momentum: np.ndarray | None
    angular_momentum: np.ndarray | float | None
    reparam_momentum: np.ndarray
    scales: dict = field(default_factory=dict)

    def values(self) -> dict:
        out = {"energy": np.asarray(self.energy), "reparam_momentum": self.reparam_momentum}
        if self.linear_momentum is not None:
            out["linear_momentum"] = np.asarray(self.linear_momentum)
            out["angular_momentum"] = np.asarray(self.angular_momentum)
        return out


def _record(f: Immersion, u, p, time):
    geo = f.geometry
    rep = _dot(p, geo.ftheta)
    energy = float(np.sum(p * u))
    scales = {
        "energy": abs(energy),
        "reparam_momentum": float(np.max(np.linalg.norm(p, axis=1) * geo.sqrt_g)),
    }
    lin = ang = None
    if f.ambient.flat:
        lin = np.sum(p, axis=0)
        ang = _wedge(f.nodes, p).sum(axis=0)
        scales["linear_momentum"] = float(np.sum(np.linalg.norm(p, axis=1)))
        scales["angular_momentum"] = float(np.sum(np.linalg.norm(f.nodes, axis=1) * np.linalg.norm(p, axis=1)))
    return ConservedRecord(time, energy, lin, ang, rep, scales)


def conserved_quantities(spec: MetricSpec, f: Immersion, f_t, time=0.0, handle=None, momenta=None):
    """Evaluate the conserved quantities at ``(f, f_t)``.

    Parameters
    ----------
    momenta : array, optional
        Precomputed density ``W P f_t``; computed from ``spec`` otherwise.
    """
    f_t = check_field(f, f_t, "f_t")
    if momenta is None:
        P = handle if handle is not None else assemble_P(spec, f)
        momenta = P.apply_weighted(f_t)
    return _record(f, f_t, momenta, time)


def angular_momentum(f: Immersion, p):
    """``sum_j f_j ^ p_j``; only defined for a Euclidean ambient."""
    if not f.ambient.flat:
        raise UnsupportedError("angular momentum is only defined for a Euclidean ambient")
    return _wedge(f.nodes, np.asarray(p)).sum(axis=0)


def conservation_drift(path, scaled=True) -> dict:
    """Maximal deviation of each conserved quantity from its initial value.

    With ``scaled=False`` the deviation is divided by ``max(|Q(0)|, EPS_FLOOR)``;
    with ``scaled=True`` (default) by ``max(|Q(0)|, scale_Q(0), EPS_FLOOR)``,
    where ``scale_Q`` is the sum of integrand magnitudes recorded with the
    quantity.  Vector and density quantities use the max norm.
    """
    recs = path.diagnostics
    if not recs:
        return {}
    first = recs[0].values()
    out = {}
    for name, q0 in first.items():
        dev = 0.0
        for r in recs[1:]:
            dev = max(dev, float(np.max(np.abs(r.values()[name] - q0))))
        denom = max(float(np.max(np.abs(q0))), EPS_FLOOR)
        if scaled:
            denom = max(denom, recs[0].scales.get(name, 0.0))
        out[name] = dev / denom
    return out


def _velocities(path):
    vel = getattr(path, "velocities", None)
    if vel is not None and len(vel) == len(path.curves):
        return [np.asarray(v) for v in vel]
    x = np.stack([c.nodes for c in path.curves])
    return list(np.gradient(x, np.asarray(path.times), axis=0, edge_order=2))


def _trapezoid(y, t):
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


def path_length(spec: MetricSpec, path) -> float:
    """``int sqrt(G(f_t, f_t)) dt`` by the time trapezoid rule."""
    if len(path.times) < 2:
        return 0.0
    vel = _velocities(path)
    speeds = [np.sqrt(max(eval_metric(spec, c, v, v), 0.0)) for c, v in zip(path.curves, vel)]
    return _trapezoid(speeds, path.times)


def area_swept(path) -> float:
    """``int int |f_t^perp| vol dt`` by nodal quadrature and the time trapezoid."""
    if len(path.times) < 2:
        raise DomainError("area_swept needs at least 2 time samples")
    vel = _velocities(path)
    dens = []
    for c, v in zip(path.curves, vel):
        geo = c.geometry
        dens.append(float(np.sum(geo.w * np.linalg.norm(geo.normal_part(v), axis=1))))
    return _trapezoid(dens, path.times)


def known_constants(spec: MetricSpec) -> dict:
    """Constants for which the spec is known to satisfy a distance condition.

    Returns a dict with keys among ``1, 2, 3`` (condition constants) and
    ``"lipschitz"`` (constant ``C`` in ``|d sqrt(Vol)/dt| <= sqrt(G)/(2 sqrt(C))``).
    """
    if isinstance(spec, Conformal) and isinstance(spec.phi, Power) and spec.phi.alpha == 1:
        c = spec.phi.c
        return {2: float(np.sqrt(c)), "lipschitz": float(np.sqrt(c))}
    if isinstance(spec, CurvatureWeighted) and spec.A > 0:
        return {3: 1.0, "lipschitz": float(spec.A)}
    if isinstance(spec, WeightedSobolev):
        w = {i: phi for phi, i in spec.weights}
        if all(isinstance(phi, Constant) for phi in w.values()) and 1 in w:
            return {1: float(np.sqrt(min(w[0].c, w[1].c)))}
    raise UnsupportedError(f"no known distance-bound constant for {spec.kind}")


def vol_lipschitz_check(spec: MetricSpec, path, C=None) -> dict:
    """Check ``|sqrt(Vol(t)) - sqrt(Vol(0))| <= L(0, t) / (2 sqrt(C))`` at every sample."""
    if C is None:
        C = known_constants(spec).get("lipschitz")
        if C is None:
            raise UnsupportedError(f"no Lipschitz constant known for {spec.kind}")
    vel = _velocities(path)
    speeds = [np.sqrt(max(eval_metric(spec, c, v, v), 0.0)) for c, v in zip(path.curves, vel)]
    sv = np.sqrt([c.geometry.Vol for c in path.curves])
    t = np.asarray(path.times, dtype=float)
    L = np.concatenate([[0.0], np.cumsum(0.5 * (np.asarray(speeds[1:]) + speeds[:-1]) * np.diff(t))])
    lhs = np.abs(sv - sv[0])
    rhs = L / (2 * np.sqrt(C))
    k = int(np.argmax(lhs - rhs))
    return {
        "lhs": float(lhs[-1]),
        "rhs": float(rhs[-1]),
        "worst_margin": float(rhs[k] - lhs[k]),
        "holds": bool(np.all(lhs <= rhs + 1e-12 * np.maximum(1, rhs))),
        "constant": C,
    }


def _h1_norm2(f, h):
    from .operators import laplacian

    return float(np.sum(f.geometry.w[:, None] * (h + laplacian(f, h)) * h))


def distance_bound_check(spec: MetricSpec, path, which: int, samples=32, seed=0) -> dict:
    """Inequalities behind positive geodesic distance for a known-constant pair.

    ``which = 2``: ``Length >= C2 * area_swept`` and the sqrt(Vol) Lipschitz
    bound.  ``which = 3``: ``Length >= C3 * area_swept / max sqrt(Vol)``.
    ``which = 1``: Rayleigh-quotient scan ``min ||h||_G^2 / ||h||_H1^2`` over
    random fields on each curve of the path, compared with ``C1**2``.
    """
    consts = known_constants(spec)
    if which not in consts:
        raise UnsupportedError(f"condition ({which}) has no known constant for {spec.kind}")
    C = consts[which]
    rows = []
    if which == 1:
        from .samples import random_field

        rng = np.random.default_rng(seed)
        q = np.inf
        for c in path.curves:
            for _ in range(samples):
                h = random_field(c, rng)
                q = min(q, eval_metric(spec, c, h, h) / _h1_norm2(c, h))
        rows.append(("rayleigh_min", q, C**2))
    else:
        L = path_length(spec, path) if len(path.times) > 1 else 0.0
        A = area_swept(path) if len(path.times) > 1 else 0.0
        if which == 2:
            rows.append(("length_vs_area", L, C * A))
        else:
            vmax = max(np.sqrt(c.geometry.Vol) for c in path.curves)
            rows.append(("length_vs_area", L, C * A / vmax))
        if "lipschitz" in consts and len(path.times) > 1:
            lip = vol_lipschitz_check(spec, path, consts["lipschitz"])
            rows.append(("length_vs_sqrt_vol", lip["rhs"], lip["lhs"]))
    tol = 1e-12
    return {
        "condition": which,
        "constant": C,
        "rows": [
            {"name": n, "lhs": float(a), "rhs": float(b), "margin": float(a - b), "holds": bool(a >= b - tol * max(1, abs(b)))}
            for n, a, b in rows
        ],
        "holds": all(a >= b - tol * max(1, abs(b)) for _, a, b in rows),
    }


def scale_invariance_check(spec: MetricSpec, f: Immersion, h, k, lam) -> float:
    """``G_{lam f}(lam h, lam k) / G_f(h, k) - 1``."""
    if not f.ambient.flat:
        raise DomainError("scale invariance is only defined for a Euclidean ambient")
    if not isinstance(spec, ScaleInvariantSobolev):
        raise DomainError("scale_invariance_check expects a ScaleInvariantSobolev spec")
    h = check_field(f, h, "h")
    k = check_field(f, k, "k")
    g0 = eval_metric(spec, f, h, k)
    g1 = eval_metric(spec, f.with_nodes(lam * f.nodes), lam * h, lam * k)
    return float(g1 / g0 - 1)
