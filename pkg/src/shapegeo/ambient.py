"""Ambient Riemannian manifolds: flat Euclidean space and the round 2-sphere.

The sphere is handled extrinsically, as the set ``|x| = R`` in R^3 with
tangent spaces ``{v : <v, x> = 0}``.  Every function accepts single points
of shape ``(n,)`` or stacks of points of shape ``(..., n)``.

Curvature convention: ``R(X, Y)Z = K (<Y, Z> X - <X, Z> Y)`` with
``K = 1/R**2``, so that ``<R(X, Y)Y, X> > 0`` for orthonormal ``X, Y``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputShapeError

__all__ = [
    "AmbientSpace",
    "Euclidean",
    "Sphere",
    "ambient_from_dict",
    "project_tangent",
    "curvature_apply",
    "covariant_time_derivative",
]

TANGENT_TOL = 1e-10


def _dot(a, b):
    return np.sum(a * b, axis=-1, keepdims=True)


class AmbientSpace:
    """Common interface of the supported ambients."""

    dim: int
    flat: bool
    sectional_curvature: float

    def project(self, x, v):
        raise NotImplementedError

    def dproject(self, x, xdot, v):
        """Derivative of ``x -> project(x, v)`` in direction ``xdot`` (v fixed)."""
        raise NotImplementedError

    def retract(self, x):
        """Map an ambient point back onto the manifold."""
        raise NotImplementedError

    def on_manifold(self, x, tol=1e-10) -> bool:
        raise NotImplementedError

    def curvature(self, X, Y, Z):
        K = self.sectional_curvature
        if K == 0:
            return np.zeros(np.broadcast(X, Y, Z).shape, dtype=np.result_type(X, Y, Z))
        return K * (_dot(Y, Z) * X - _dot(X, Z) * Y)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Euclidean(AmbientSpace):
    """Flat space R^dim, dim in {2, 3}."""

    dim: int = 2

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise DomainError(f"Euclidean dimension must be 2 or 3, got {self.dim}")

    flat = True
    sectional_curvature = 0.0

    def project(self, x, v):
        return v

    def dproject(self, x, xdot, v):
        return np.zeros_like(v)

    def retract(self, x):
        return x

    def on_manifold(self, x, tol=1e-10) -> bool:
        return True

    def to_dict(self):
        return {"kind": "euclidean", "dim": self.dim}


@dataclass(frozen=True)
class Sphere(AmbientSpace):
    """Round sphere of radius ``radius`` embedded in R^3."""

    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError(f"sphere radius must be positive, got {self.radius}")

    dim = 3
    flat = False

    @property
    def sectional_curvature(self):
        return 1.0 / self.radius**2

    def project(self, x, v):
        return v - _dot(v, x) * x / self.radius**2

    def dproject(self, x, xdot, v):
        return -(_dot(v, xdot) * x + _dot(v, x) * xdot) / self.radius**2

    def retract(self, x):
        return self.radius * x / np.linalg.norm(x, axis=-1, keepdims=True)

    def on_manifold(self, x, tol=1e-10) -> bool:
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        return bool(np.all(np.abs(r - self.radius) <= tol * max(1.0, self.radius)))

    def to_dict(self):
        return {"kind": "sphere", "radius": self.radius}


def ambient_from_dict(d: dict) -> AmbientSpace:
    kind = d.get("kind")
    if kind == "euclidean":
        return Euclidean(int(d.get("dim", 2)))
    if kind == "sphere":
        return Sphere(float(d.get("radius", 1.0)))
    raise DomainError(f"unknown ambient kind {kind!r}")


def _check_vectors(amb, *vs):
    out = []
    for v in vs:
        v = np.asarray(v)
        if v.shape[-1] != amb.dim:
            raise InputShapeError(f"expected vectors of length {amb.dim}, got {v.shape}")
        out.append(v)
    return out


def _check_tangent(amb, x, *vs):
    if amb.flat:
        return
    scale = amb.radius
    for v in vs:
        nv = np.maximum(np.linalg.norm(v, axis=-1), 1.0)
        if np.any(np.abs(np.sum(v * x, axis=-1)) > TANGENT_TOL * scale * nv):
            raise DomainError("vector is not tangent to the sphere at the base point")


def project_tangent(amb: AmbientSpace, x, v):
    """Orthogonal projection of ``v`` onto the tangent space at ``x``."""
    x, v = _check_vectors(amb, x, v)
    return amb.project(x, v)


def curvature_apply(amb: AmbientSpace, x, X, Y, Z):
    """Riemann curvature ``R(X, Y)Z`` at ``x``.

    Raises
    ------
    DomainError
        On the sphere, if any of ``X, Y, Z`` is not tangent at ``x``.
    """
    x, X, Y, Z = _check_vectors(amb, x, X, Y, Z)
    _check_tangent(amb, x, X, Y, Z)
    return amb.curvature(X, Y, Z)


def covariant_time_derivative(amb: AmbientSpace, x, h, dt):
    """Covariant derivative along a sampled path.

    Parameters
    ----------
    x : array, shape (T, ..., n)
        Base points at ``T`` equally spaced times.
    h : array, same shape
        Tangent vectors along ``x``.
    dt : float
        Time step.

    Returns
    -------
    array
        Centered (second-order one-sided at the ends) time difference of
        ``h``, projected to the tangent space at ``x(t)``.
    """
    x = np.asarray(x)
    h = np.asarray(h)
    if x.shape[0] < 3:
        raise DomainError("covariant_time_derivative needs at least 3 time samples")
    if x.shape != h.shape:
        raise InputShapeError(f"path shape {x.shape} and field shape {h.shape} differ")
    x, h = _check_vectors(amb, x, h)
    dh = np.gradient(h, dt, axis=0, edge_order=2)
    return amb.project(x, dh)
