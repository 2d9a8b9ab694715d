"""Discrete calculus on the uniform periodic grid of the circle.

Nodal arrays have the node index on axis 0; trailing axes (ambient
components) are carried along.  Edge arrays use index ``j`` for the edge
between nodes ``j`` and ``j + 1``.  All routines preserve the input dtype,
so they can be evaluated in extended precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, InputShapeError

__all__ = [
    "Grid",
    "d_theta",
    "second_difference",
    "forward_difference",
    "forward_difference_adjoint",
    "integrate",
    "interp_periodic",
    "PeriodicSpline",
]


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``theta_j = 2*pi*j/N`` on the circle."""

    node_count: int

    def __post_init__(self):
        n = self.node_count
        if int(n) != n or n < 8 or n % 2:
            raise DomainError(f"node_count must be an even integer >= 8, got {n}")

    @property
    def N(self) -> int:
        return self.node_count

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.node_count

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.spacing * np.arange(self.node_count)

    def check(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u)
        if u.ndim == 0 or u.shape[0] != self.node_count:
            raise InputShapeError(
                f"expected {self.node_count} nodal values, got shape {u.shape}"
            )
        return u


def d_theta(grid: Grid, u) -> np.ndarray:
    """Centered difference ``(u[j+1] - u[j-1]) / (2 h)``."""
    u = grid.check(u)
    return (np.roll(u, -1, axis=0) - np.roll(u, 1, axis=0)) / (2 * grid.spacing)


def second_difference(grid: Grid, u) -> np.ndarray:
    """Three-point second difference ``(u[j+1] - 2u[j] + u[j-1]) / h**2``."""
    u = grid.check(u)
    return (np.roll(u, -1, axis=0) - 2 * u + np.roll(u, 1, axis=0)) / grid.spacing**2


def forward_difference(grid: Grid, u) -> np.ndarray:
    """Edge values ``(u[j+1] - u[j]) / h``."""
    u = grid.check(u)
    return (np.roll(u, -1, axis=0) - u) / grid.spacing


def forward_difference_adjoint(grid: Grid, v) -> np.ndarray:
    """Transpose of :func:`forward_difference`: ``(v[j-1] - v[j]) / h``."""
    v = grid.check(v)
    return (np.roll(v, 1, axis=0) - v) / grid.spacing


def integrate(grid: Grid, rho) -> float:
    """Rectangle rule ``h * sum(rho)``; exact for trig polynomials of degree < N/2."""
    rho = grid.check(rho)
    return grid.spacing * np.sum(rho, axis=0)


class PeriodicSpline:
    """Periodic cubic spline through nodal values (any trailing shape)."""

    def __init__(self, grid: Grid, u):
        u = np.asarray(grid.check(u), dtype=float)
        knots = np.append(grid.nodes, 2 * np.pi)
        values = np.concatenate([u, u[:1]], axis=0)
        self.grid = grid
        self._spline = CubicSpline(knots, values, axis=0, bc_type="periodic")

    def __call__(self, theta, nu: int = 0):
        theta = np.mod(np.asarray(theta, dtype=float), 2 * np.pi)
        return self._spline(theta, nu)


def interp_periodic(grid: Grid, u, theta):
    """Evaluate the periodic cubic interpolant of ``u`` at ``theta`` (wrapped)."""
    return PeriodicSpline(grid, u)(theta)
