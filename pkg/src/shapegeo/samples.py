"""Seeded random curves and fields used by the check suites.

Random planar immersions are star-shaped, ``exp(rho(theta)) (cos, sin)``,
with ``rho`` a trigonometric polynomial whose degree-``k`` coefficients are
uniform in ``[-amp, amp]`` and divided by ``k``.  Star-shaped curves have
nonvanishing derivative, so every draw is an immersion.  Sphere curves lift
``(cos, sin, z(theta))`` radially onto the sphere.
"""

from __future__ import annotations

import numpy as np

from .ambient import Euclidean, Sphere
from .calculus import Grid
from .geometry import Immersion

__all__ = ["trig_poly", "random_immersion", "random_field", "circle_field"]


def trig_poly(theta, rng, degree=5, amp=0.3, decay=True, constant=False):
    """Random real trigonometric polynomial sampled at ``theta``."""
    out = np.zeros_like(theta)
    if constant:
        out = out + rng.uniform(-amp, amp)
    for k in range(1, degree + 1):
        a, b = rng.uniform(-amp, amp, size=2)
        s = k if decay else 1
        out = out + (a * np.cos(k * theta) + b * np.sin(k * theta)) / s
    return out


def random_immersion(N, rng, ambient=None, degree=5, amp=0.3, radius=1.0):
    """Random smooth immersion near the unit circle (or the equator of a sphere)."""
    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = np.random.default_rng(rng)
    ambient = ambient or Euclidean(2)
    th = Grid(N).nodes
    if ambient.flat:
        r = radius * np.exp(trig_poly(th, rng, degree, amp))
        x = np.zeros((N, ambient.dim))
        x[:, 0] = r * np.cos(th)
        x[:, 1] = r * np.sin(th)
        if ambient.dim == 3:
            x[:, 2] = trig_poly(th, rng, degree, amp)
        return Immersion(ambient, x)
    z = trig_poly(th, rng, degree, amp)
    x = np.stack([np.cos(th), np.sin(th), z], axis=1)
    return Immersion(ambient, ambient.retract(x))


def random_field(f: Immersion, rng, degree=5, amp=1.0, constant=True):
    """Random trigonometric vector field along ``f`` (projected on the sphere)."""
    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = np.random.default_rng(rng)
    th = f.grid.nodes
    h = np.stack(
        [trig_poly(th, rng, degree, amp, decay=False, constant=constant) for _ in range(f.ambient.dim)],
        axis=1,
    )
    return f.ambient.project(f.nodes, h).astype(f.nodes.dtype)


def circle_field(f: Immersion, radial, tangential=None):
    """Field ``radial(theta) e_r + tangential(theta) e_theta`` on a centered planar circle."""
    th = f.grid.nodes
    e_r = np.stack([np.cos(th), np.sin(th)], axis=1)
    e_t = np.stack([-np.sin(th), np.cos(th)], axis=1)
    out = np.asarray(radial)[:, None] * e_r
    if tangential is not None:
        out = out + np.asarray(tangential)[:, None] * e_t
    if f.ambient.dim == 3:
        out = np.concatenate([out, np.zeros((f.N, 1))], axis=1)
    return out


def sphere_ambient(radius=1.0):
    return Sphere(radius)
