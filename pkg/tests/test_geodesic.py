import warnings

import numpy as np
import pytest

from shapegeo.calculus import PeriodicSpline
from shapegeo.errors import DomainError, FlowBreakdownError, LiftBreakdownError, UnsupportedError
from shapegeo.geodesic import (
    GeodesicPath,
    horizontal_decompose,
    horizontal_lift,
    horizontality_residual,
    match_bvp,
    momentum_density,
    path_energy,
    shoot_momentum,
    shoot_velocity,
)
from shapegeo.geometry import Immersion
from shapegeo.metric_spec import Conformal, Constant, CurvatureWeighted, Power, ScaleInvariantSobolev
from shapegeo.metrics import eval_metric
from shapegeo.radial import radial_geodesic
from shapegeo.samples import circle_field, random_field, random_immersion

from conftest import order, sup

ORDER_ZERO = [Conformal(Power(1.0, 1.0)), CurvatureWeighted(0.1), ScaleInvariantSobolev(0)]


@pytest.mark.parametrize("shoot", [shoot_momentum, shoot_velocity])
def test_zero_velocity_gives_constant_path(shoot, wobbly):
    path = shoot(ScaleInvariantSobolev(1), wobbly, np.zeros_like(wobbly.nodes), 0.1, 10)
    assert np.all(path.nodes == wobbly.nodes)
    assert all(sup(p) == 0 for p in path.momenta)
    assert len(path) == 11 and path.times[-1] == pytest.approx(0.1)


def test_momentum_density_pairing(wobbly, rng):
    spec = ScaleInvariantSobolev(1)
    u, h = random_field(wobbly, rng), random_field(wobbly, rng)
    p = momentum_density(spec, wobbly, u)
    assert np.sum(p * h) == pytest.approx(eval_metric(spec, wobbly, u, h), rel=1e-13)


def test_translation_geodesic(wobbly):
    # Phi(V) = 1/V: the H-bracket of a constant field vanishes
    c = np.array([0.3, -0.2])
    u0 = np.tile(c, (wobbly.N, 1))
    for shoot in (shoot_momentum, shoot_velocity):
        path = shoot(Conformal(Power(1.0, -1.0)), wobbly, u0, 1.0, 50)
        exact = wobbly.nodes[None] + path.times[:, None, None] * c
        assert sup(path.nodes - exact) < 1e-10


def test_radial_conformal_circle():
    f = Immersion.circle(64)
    spec = Conformal(Constant(1.0))
    path = shoot_momentum(spec, f, circle_field(f, np.full(64, 0.4)), 0.5, 100)
    r = np.linalg.norm(path.nodes, axis=2)
    assert sup(r - r[:, :1]) < 1e-12  # stays a centered circle
    ro, _ = radial_geodesic(spec, 1.0, 0.4, path.times)
    assert sup(r[:, 0] / ro - 1) < 1e-8


def test_forms_agree_and_converge(circle):
    th = circle.grid.nodes
    u0 = circle_field(circle, 0.5 + 0.3 * np.cos(2 * th))
    spec = Conformal(Power(1.0, 1.0))
    gaps = []
    for steps in (25, 50):
        a = shoot_momentum(spec, circle, u0, 0.25, steps)
        b = shoot_velocity(spec, circle, u0, 0.25, steps)
        gaps.append(sup(a.nodes[-1] - b.nodes[-1]))
    assert gaps[1] < 1e-7
    assert gaps[0] / gaps[1] > 12


def test_sphere_shot_stays_on_sphere(sphere_curve, rng):
    u0 = 0.3 * random_field(sphere_curve, rng, degree=2)
    for shoot in (shoot_momentum, shoot_velocity):
        path = shoot(Conformal(Constant(1.0)), sphere_curve, u0, 0.1, 20)
        assert sup(np.linalg.norm(path.nodes, axis=2) - 1) < 1e-14
        for c, v in zip(path.curves, path.velocities):
            assert sup(np.sum(c.nodes * v, axis=1)) < 1e-12
    with pytest.raises(UnsupportedError):
        shoot_momentum(Conformal(Constant(1.0)), sphere_curve, u0, 0.1, 2, gradients="discrete")


def test_sphere_great_circle_motion():
    # the equator rotating about the x-axis sweeps great circles and stays one
    f = Immersion.equator(64)
    u0 = np.zeros((64, 3))
    u0[:, 2] = f.nodes[:, 1]
    path = shoot_momentum(Conformal(Constant(1.0)), f, u0, 0.5, 50)
    final = path.curves[-1]
    assert final.geometry.Vol == pytest.approx(f.geometry.Vol, rel=1e-10)
    axis = np.cross(final.nodes[0], final.nodes[16])
    assert sup(final.nodes @ axis) < 1e-8  # RK4 error at dt = 0.01


def test_shoot_argument_errors(circle):
    u0 = np.zeros_like(circle.nodes)
    spec = Conformal(Constant(1.0))
    with pytest.raises(DomainError):
        shoot_momentum(spec, circle, u0, -1.0, 10)
    with pytest.raises(DomainError):
        shoot_momentum(spec, circle, u0, 1.0, 0)
    with pytest.raises(DomainError):
        shoot_momentum(spec, circle, u0, 1.0, 2, gradients="exact")


def test_flow_breakdown_keeps_partial_path(wobbly, rng):
    u0 = random_field(wobbly, rng)
    with pytest.raises(FlowBreakdownError) as exc:
        shoot_momentum(ScaleInvariantSobolev(2), wobbly, u0, 1.0, 5, max_iter=1)
    assert len(exc.value.path) == 1
    assert np.array_equal(exc.value.path.nodes[0], wobbly.nodes)


def test_geodesic_path_validation(circle):
    with pytest.raises(DomainError):
        GeodesicPath([0.0, 0.0], [circle, circle], [circle.nodes, circle.nodes])
    with pytest.raises(DomainError):
        GeodesicPath([0.0, 1.0], [circle], [circle.nodes])


# --------------------------------------------------------------- horizontality


@pytest.mark.parametrize("spec", ORDER_ZERO, ids=lambda s: s.kind)
def test_order_zero_shortcut_matches_general(spec, wobbly, rng):
    h = random_field(wobbly, rng)
    ver, hor = horizontal_decompose(spec, wobbly, h)
    ver2, hor2 = horizontal_decompose(spec, wobbly, h, shortcut=False)
    assert sup(hor - wobbly.geometry.normal_part(h)) < 1e-14
    assert sup(ver - ver2) < 1e-12 * sup(ver)
    assert sup(hor - hor2) < 1e-12 * sup(h)


def test_sobolev_decomposition_properties(wobbly, rng):
    spec = ScaleInvariantSobolev(1)
    ft = wobbly.geometry.ftheta
    h = random_field(wobbly, rng)
    ver, hor = horizontal_decompose(spec, wobbly, h)
    assert sup(ver[:, None] * ft + hor - h) < 1e-14 * sup(h)
    vert = ver[:, None] * ft
    assert abs(eval_metric(spec, wobbly, vert, hor)) <= 1e-9 * eval_metric(spec, wobbly, h, h)
    ver2, hor2 = horizontal_decompose(spec, wobbly, hor)
    assert sup(ver2) < 1e-9 * sup(ver)
    assert sup(hor2 - hor) < 1e-9 * sup(hor)
    assert horizontality_residual(spec, wobbly, hor) < 1e-10


def test_normal_field_on_circle_has_vertical_part():
    # Delta(a e_r) = (a + a'') e_r... - 2 a' e_theta on the unit circle, so a
    # normal field is not horizontal for a Sobolev metric: with weights
    # V**-3 and V**-1, ver = c sin(theta), c = 2 / (2 + 1/(4 pi^2))
    c = 2 / (2 + 1 / (4 * np.pi**2))
    errs = []
    for N in (64, 128):
        f = Immersion.circle(N)
        th = f.grid.nodes
        ver, _ = horizontal_decompose(ScaleInvariantSobolev(1), f, circle_field(f, np.cos(th)))
        errs.append(sup(ver - c * np.sin(th)))
    assert errs[1] < 1e-3
    assert order(*errs) == pytest.approx(2, abs=0.1)


def test_lift_of_horizontal_path_is_identity():
    f = Immersion.circle(64)
    th = f.grid.nodes
    ts = np.linspace(0, 1, 11)
    curves = [f.with_nodes((1 + t) * f.nodes) for t in ts]
    vel = [f.nodes for _ in ts]
    lifted = horizontal_lift(Conformal(Power(1.0, 1.0)), GeodesicPath(ts, curves, vel))
    assert sup(lifted.info["phi"] - th) < 1e-10
    assert sup(lifted.nodes - np.stack([c.nodes for c in curves])) < 1e-10


def test_lift_freezes_pure_reparametrization():
    # the discrete metric is invariant under grid shifts only, so phi carries
    # an O(N^-4) error on top of the interpolation error; N = 256 keeps both
    # under the tolerance
    f0 = random_immersion(256, 5, amp=0.2)
    th = f0.grid.nodes
    sp = PeriodicSpline(f0.grid, f0.nodes)
    ts = np.linspace(0, 1, 101)
    curves = [f0.with_nodes(sp(th + 0.7 * t)) for t in ts]
    lifted = horizontal_lift(ScaleInvariantSobolev(1), curves, times=ts)
    assert sup(lifted.nodes - f0.nodes[None]) < 1e-6


def test_lift_breakdown():
    f0 = Immersion.circle(32)
    th = f0.grid.nodes
    sp = PeriodicSpline(f0.grid, f0.nodes * (1 + 0.2 * np.cos(3 * th))[:, None])
    ts = np.linspace(0, 1, 3)
    curves = [f0.with_nodes(sp(th + 3 * t * np.sin(th))) for t in ts]
    with pytest.raises(LiftBreakdownError):
        horizontal_lift(Conformal(Constant(1.0)), curves, times=ts)
    with pytest.raises(DomainError):
        horizontal_lift(Conformal(Constant(1.0)), curves)


def test_horizontal_shot_with_projection(circle):
    th = circle.grid.nodes
    u0 = circle_field(circle, 0.3 * np.cos(2 * th), 0.2 * np.sin(3 * th))
    spec = ScaleInvariantSobolev(1)
    path = shoot_momentum(spec, circle, u0, 0.1, 20, project_horizontal=True)
    for c, v in zip(path.curves, path.velocities):
        assert horizontality_residual(spec, c, v) < 1e-9


# --------------------------------------------------------------- matching


def test_path_energy_constant_and_translation(wobbly):
    X = np.stack([wobbly.nodes] * 5)
    E, g = path_energy(ScaleInvariantSobolev(1), X)
    assert E == 0 and sup(g) == 0
    c = np.array([0.3, -0.2])
    s = np.linspace(0, 1, 5)[:, None, None]
    E, g = path_energy(Conformal(Power(1.0, -1.0)), wobbly.nodes[None] + s * c)
    assert E == pytest.approx(0.5 * c @ c, rel=1e-14)
    assert sup(g[1:-1]) < 1e-13


def test_path_energy_gradient_fd(wobbly, rng):
    s = np.linspace(0, 1, 6)[:, None, None]
    X = (1 + 0.5 * s) * wobbly.nodes[None] + 0.01 * rng.standard_normal((6,) + wobbly.nodes.shape)
    for spec in (Conformal(Power(1.0, 1.0)), CurvatureWeighted(0.1), ScaleInvariantSobolev(1)):
        _, g = path_energy(spec, X)
        for _ in range(3):
            d = np.zeros_like(X)
            d[1:-1] = rng.standard_normal(X[1:-1].shape)
            e = 1e-6
            fd = (path_energy(spec, X + e * d, gradient=False)[0] - path_energy(spec, X - e * d, gradient=False)[0]) / (2 * e)
            assert np.sum(g * d) == pytest.approx(fd, rel=1e-6)


def test_match_identical_endpoints(wobbly):
    path = match_bvp(ScaleInvariantSobolev(1), wobbly, wobbly, time_nodes=5)
    assert path.info["energy"] == 0 and path.info["converged"]
    assert sup(path.nodes - wobbly.nodes[None]) == 0


def test_match_warns_when_not_converged():
    f0 = Immersion.circle(32)
    f1 = Immersion.circle(32, radius=2.0)
    with pytest.warns(RuntimeWarning):
        path = match_bvp(Conformal(Power(1.0, 1.0)), f0, f1, time_nodes=8, maxiter=1)
    assert not path.info["converged"]


def test_match_errors(sphere_curve, circle):
    with pytest.raises(UnsupportedError):
        match_bvp(Conformal(Constant(1.0)), sphere_curve, sphere_curve)
    with pytest.raises(DomainError):
        match_bvp(Conformal(Constant(1.0)), circle, Immersion.circle(64))
    with pytest.raises(UnsupportedError):
        path_energy(Conformal(Constant(1.0)), np.stack([sphere_curve.nodes] * 3), ambient=sphere_curve.ambient)
