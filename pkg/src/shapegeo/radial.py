"""One-dimensional reduction for concentric circles.

A path of centered circles ``r(t) (cos, sin)`` has kinetic energy
``a(r) rdot**2`` with

* conformal ``Phi``: ``a(r) = 2 pi r Phi(2 pi r)``,
* curvature weighted: ``a(r) = 2 pi r (1 + A / r**2)``,
* Sobolev terms ``Phi_i Delta^i``: ``a(r) = 2 pi r sum Phi_i(2 pi r) r**(-2 i)``
  (radial fields are eigenfields, ``Delta e_r = e_r / r**2``).

Geodesics solve ``rddot = -a'(r) rdot**2 / (2 a(r))``.  ``a'`` is taken by
complex-step differentiation and the ODE is integrated with an adaptive
high-order Runge-Kutta method, so this module shares no numerics with the
curve discretization.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import DomainError, UnsupportedError
from .metric_spec import Conformal, CurvatureWeighted, MetricSpec

__all__ = ["radial_coefficient", "radial_geodesic", "radial_initial_speed"]

_STEP = 1e-30


def radial_coefficient(spec: MetricSpec):
    """Return ``a(r)`` for the given spec (accepts complex ``r``)."""
    if isinstance(spec, CurvatureWeighted):
        A = spec.A
        return lambda r: 2 * np.pi * r * (1 + A / r**2)
    if isinstance(spec, Conformal):
        phi = spec.phi
        return lambda r: 2 * np.pi * r * phi(2 * np.pi * r)
    try:
        terms = spec.terms()
    except AttributeError as exc:
        raise UnsupportedError(f"no radial reduction for {type(spec).__name__}") from exc
    return lambda r: 2 * np.pi * r * sum(phi(2 * np.pi * r) * r ** (-2 * i) for phi, i in terms)


def _rhs(a):
    def f(t, y):
        r, v = y
        da = np.imag(a(r + 1j * _STEP)) / _STEP
        return [v, -da * v * v / (2 * a(r))]

    return f


def radial_geodesic(spec: MetricSpec, r0, v0, times, rtol=1e-12, atol=1e-14):
    """Radius and radial speed at ``times`` for the geodesic from ``(r0, v0)``.

    Returns
    -------
    r, v : arrays shaped like ``times``
    """
    if not r0 > 0:
        raise DomainError(f"initial radius must be positive, got {r0}")
    times = np.asarray(times, dtype=float)
    a = radial_coefficient(spec)
    sol = solve_ivp(_rhs(a), (0.0, float(times[-1])), [float(r0), float(v0)], method="DOP853",
                    t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise DomainError(f"radial integration failed: {sol.message}")
    return sol.y[0], sol.y[1]


def radial_initial_speed(spec: MetricSpec, r0, r1, T=1.0):
    """Initial speed of the radial geodesic reaching ``r1`` at time ``T``.

    Uses the conserved energy ``a(r) rdot**2``: the travel time is
    ``int_{r0}^{r1} sqrt(a(r)/E) dr``, solved for ``E``.
    """
    a = radial_coefficient(spec)
    if r0 == r1:
        return 0.0
    lo, hi = sorted((r0, r1))
    I, _ = quad(lambda r: np.sqrt(a(r)), lo, hi, epsabs=0, epsrel=1e-13, limit=200)
    E = (I / T) ** 2
    v = np.sqrt(E / a(r0))
    return float(np.sign(r1 - r0) * v)
