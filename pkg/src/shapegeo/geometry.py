"""Immersed closed curves and their induced geometry.

Discretization used throughout the package:

* ``f_theta`` is the centered difference of the nodes, projected to the
  ambient tangent space; ``g = |f_theta|**2``.
* Node weights ``w_j = h * sqrt(g_j)`` (``h = 2*pi/N``) discretize vol(g), so
  ``Vol = sum(w)``.
* Edges carry the forward difference ``(f_{j+1} - f_j)/h`` and its length
  ``s_j``; they define the weak-form Laplacian in :mod:`shapegeo.operators`.
  On the sphere the edge vector is tangent at the normalized midpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .ambient import AmbientSpace, Euclidean, Sphere
from .calculus import Grid, d_theta, forward_difference, second_difference
from .errors import DegenerateImmersionError, DomainError, InputShapeError

__all__ = [
    "EPS_IMM",
    "Immersion",
    "GeometryCache",
    "induced_geometry",
    "split",
    "grad_scalar",
    "check_field",
]

EPS_IMM = 1e-8


def _dot(a, b):
    return np.sum(a * b, axis=-1)


@dataclass(frozen=True, eq=False)
class Immersion:
    """Nodal samples ``f(theta_j)`` of a closed curve in an ambient space.

    Parameters
    ----------
    ambient : AmbientSpace
    nodes : array_like, shape (N, n)
        Ambient points at ``theta_j = 2*pi*j/N``. Float dtypes (including
        ``np.longdouble``) are kept as given.
    """

    ambient: AmbientSpace
    nodes: np.ndarray
    grid: Grid = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.nodes)
        if not np.issubdtype(x.dtype, np.floating):
            try:
                x = x.astype(float)
            except (TypeError, ValueError) as exc:
                raise InputShapeError(f"immersion nodes are not numeric: {exc}") from exc
        if x.ndim != 2 or x.shape[1] != self.ambient.dim:
            raise InputShapeError(
                f"nodes must have shape (N, {self.ambient.dim}), got {x.shape}"
            )
        if not np.all(np.isfinite(x)):
            raise DomainError("immersion nodes contain non-finite values")
        x = x.copy()
        x.flags.writeable = False
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "grid", Grid(x.shape[0]))
        if not self.ambient.on_manifold(x):
            raise DomainError("immersion nodes do not lie on the ambient sphere")
        self.geometry  # validates the immersion condition eagerly

    @property
    def N(self) -> int:
        return self.grid.node_count

    @property
    def dtype(self):
        return self.nodes.dtype

    @cached_property
    def geometry(self) -> "GeometryCache":
        return GeometryCache(self)

    def with_nodes(self, nodes) -> "Immersion":
        return Immersion(self.ambient, nodes)

    def shifted(self, k: int) -> "Immersion":
        """Reparametrize by the grid rotation ``theta -> theta + 2*pi*k/N``."""
        return Immersion(self.ambient, np.roll(self.nodes, -k, axis=0))

    @classmethod
    def circle(cls, N, radius=1.0, center=None, dim=2, dtype=float):
        """Circle ``center + radius*(cos, sin)`` in the Euclidean plane (or R^3)."""
        th = Grid(N).nodes.astype(dtype)
        x = np.zeros((N, dim), dtype=dtype)
        x[:, 0] = radius * np.cos(th)
        x[:, 1] = radius * np.sin(th)
        if center is not None:
            x = x + np.asarray(center, dtype=dtype)
        return cls(Euclidean(dim), x)

    @classmethod
    def equator(cls, N, radius=1.0, dtype=float):
        th = Grid(N).nodes.astype(dtype)
        x = np.stack([np.cos(th), np.sin(th), np.zeros_like(th)], axis=1) * radius
        return cls(Sphere(radius), x)

    @classmethod
    def latitude(cls, N, height, radius=1.0, dtype=float):
        """Circle of constant ``z = height`` on the sphere (not a geodesic unless ``height = 0``)."""
        if not abs(height) < radius:
            raise DomainError(f"latitude height must lie in (-{radius}, {radius}), got {height}")
        th = Grid(N).nodes.astype(dtype)
        rho = np.sqrt(radius**2 - height**2)
        x = np.stack([rho * np.cos(th), rho * np.sin(th), np.full_like(th, height)], axis=1)
        return cls(Sphere(radius), x)


class GeometryCache:
    """Induced quantities of an :class:`Immersion`, computed once.

    Attributes
    ----------
    ftheta : (N, n) tangent vectors ``f_theta``
    g, sqrt_g : (N,) induced metric and its square root
    w : (N,) quadrature weights ``h*sqrt_g``
    Vol : float, total length
    unit_tangent : (N, n)
    S : (N, n) normal-valued second fundamental form ``S(d_theta, d_theta)``
    traceS : (N, n) mean curvature vector ``S/g``
    edge_vec : (N, n) forward differences (edge j joins nodes j, j+1)
    edge_speed : (N,) their lengths
    edge_foot : (N, n) or None, normalized edge midpoints on the sphere
    """

    def __init__(self, f: Immersion):
        amb = f.ambient
        grid = f.grid
        x = f.nodes
        h = grid.spacing
        self.immersion = f
        self.grid = grid
        self.ambient = amb

        ft = amb.project(x, d_theta(grid, x))
        speed = np.sqrt(_dot(ft, ft))
        bad = np.flatnonzero(~(speed > EPS_IMM))
        if bad.size:
            j = int(bad[0])
            raise DegenerateImmersionError(
                f"immersion condition violated at node {j}: |f_theta| = {speed[j]:.3e}",
                node=j,
            )
        self.ftheta = ft
        self.g = speed**2
        self.sqrt_g = speed
        self.w = h * speed
        self.Vol = np.sum(self.w)
        tau = ft / speed[:, None]
        self.unit_tangent = tau

        acc = amb.project(x, second_difference(grid, x))
        self.S = acc - _dot(acc, tau)[:, None] * tau
        self.traceS = self.S / self.g[:, None]

        ev = forward_difference(grid, x)
        es = np.sqrt(_dot(ev, ev))
        bad = np.flatnonzero(~(es > EPS_IMM))
        if bad.size:
            j = int(bad[0])
            raise DegenerateImmersionError(
                f"immersion condition violated on edge {j}-{(j + 1) % grid.N}", node=j
            )
        self.edge_vec = ev
        self.edge_speed = es
        if amb.flat:
            self.edge_foot = None
        else:
            mid = x + np.roll(x, -1, axis=0)
            self.edge_foot = amb.retract(mid)

    @property
    def h(self):
        return self.grid.spacing

    def normal_part(self, v):
        """Component of ``v`` orthogonal to ``f_theta`` (and tangent to N)."""
        tau = self.unit_tangent
        v = self.ambient.project(self.immersion.nodes, v)
        return v - _dot(v, tau)[:, None] * tau


def induced_geometry(f: Immersion) -> GeometryCache:
    """Return the (cached) induced geometry of ``f``."""
    return f.geometry


def check_field(f: Immersion, h, name="field") -> np.ndarray:
    """Validate the shape of a tangent field along ``f``; tangency on the sphere."""
    h = np.asarray(h)
    if h.shape != f.nodes.shape:
        raise InputShapeError(f"{name} must have shape {f.nodes.shape}, got {h.shape}")
    if not f.ambient.flat:
        x = f.nodes
        R = f.ambient.radius
        scale = np.maximum(np.linalg.norm(h, axis=1), 1.0) * R
        if np.any(np.abs(_dot(h, x)) > 1e-10 * scale):
            raise DomainError(f"{name} is not tangent to the sphere")
    return h


def split(f: Immersion, h):
    """Split ``h = a*f_theta + h_perp`` with ``h_perp`` orthogonal to ``f_theta``.

    Returns
    -------
    a : (N,) array
    h_perp : (N, n) array
    """
    h = check_field(f, h)
    geo = f.geometry
    a = _dot(h, geo.ftheta) / geo.g
    return a, h - a[:, None] * geo.ftheta


def grad_scalar(f: Immersion, u) -> np.ndarray:
    """Coefficient of ``grad^g u`` against ``d_theta``: ``d_theta(u)/g``."""
    u = f.grid.check(u)
    return d_theta(f.grid, u) / f.geometry.g
