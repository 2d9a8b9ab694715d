import numpy as np
import pytest

from shapegeo.ambient import Euclidean
from shapegeo.errors import DegenerateImmersionError, DomainError, InputShapeError
from shapegeo.geometry import Immersion, grad_scalar, induced_geometry, split

from conftest import order, sup


def _circle_errors(N, r):
    f = Immersion.circle(N, radius=r)
    geo = induced_geometry(f)
    return (
        sup(geo.g - r**2),
        abs(geo.Vol - 2 * np.pi * r),
        sup(geo.traceS + f.nodes / r**2),
    )


@pytest.mark.parametrize("r", [1.0, 2.5])
def test_circle_family(r):
    coarse, fine = _circle_errors(128, r), _circle_errors(256, r)
    assert max(fine) < 1e-3 * max(1, r**2)
    for a, b in zip(coarse, fine):
        assert order(a, b) == pytest.approx(2, abs=0.05)


def test_circle_curvature_times_length():
    for r in (0.5, 1.0, 3.0):
        geo = Immersion.circle(512, radius=r).geometry
        kv = np.linalg.norm(geo.traceS, axis=1) * geo.Vol
        assert np.allclose(kv, 2 * np.pi, rtol=1e-4)


def test_equator_is_geodesic():
    geo = Immersion.equator(64).geometry
    assert sup(geo.traceS) < 1e-15


def test_cache_invariants(wobbly, sphere_curve):
    for f in (wobbly, sphere_curve):
        geo = f.geometry
        assert np.allclose(geo.sqrt_g, np.sqrt(geo.g))
        assert geo.Vol == pytest.approx(np.sum(geo.w))
        assert sup(np.sum(geo.S * geo.unit_tangent, axis=1)) < 1e-12
        assert np.allclose(geo.traceS, geo.S / geo.g[:, None])
    # the sphere second fundamental form is tangent to the sphere
    x = sphere_curve.nodes
    assert sup(np.sum(sphere_curve.geometry.S * x, axis=1)) < 1e-12


def test_reparametrization_equivariance(wobbly):
    g0 = wobbly.geometry
    for k in (1, 7, 50):
        g1 = wobbly.shifted(k).geometry
        for name in ("g", "sqrt_g", "S", "traceS", "unit_tangent"):
            assert np.array_equal(getattr(g1, name), np.roll(getattr(g0, name), -k, axis=0))
        assert g1.Vol == pytest.approx(g0.Vol, rel=1e-15)


def test_scaling_identities(wobbly):
    lam = 3.0
    g0 = wobbly.geometry
    g1 = wobbly.with_nodes(lam * wobbly.nodes).geometry
    assert np.allclose(g1.g, lam**2 * g0.g, rtol=1e-14)
    assert g1.Vol == pytest.approx(lam * g0.Vol, rel=1e-14)
    assert sup(g1.S - lam * g0.S) <= 1e-12 * sup(lam * g0.S)
    assert sup(g1.traceS - g0.traceS / lam) <= 1e-12 * sup(g0.traceS / lam)


def test_degenerate_immersion_names_node():
    x = Immersion.circle(16).nodes.copy()
    x[4] = x[6] = x[5]
    with pytest.raises(DegenerateImmersionError, match="5"):
        Immersion(Euclidean(2), x)


def test_input_validation(circle):
    with pytest.raises(InputShapeError):
        Immersion(Euclidean(3), circle.nodes)
    with pytest.raises(DomainError):
        Immersion.equator(32).with_nodes(2 * Immersion.equator(32).nodes)


def test_split_examples(circle):
    f = circle
    ft = f.geometry.ftheta
    a, perp = split(f, f.nodes)
    assert sup(a) < 1e-14 and np.allclose(perp, f.nodes)
    a, perp = split(f, ft)
    assert np.allclose(a, 1) and sup(perp) < 1e-14
    a, perp = split(f, f.nodes + 2 * ft)
    assert np.allclose(a, 2) and np.allclose(perp, f.nodes, atol=1e-14)


def test_split_direct_sum(wobbly, fields):
    h = fields[0]
    a, perp = split(wobbly, h)
    ft = wobbly.geometry.ftheta
    assert np.allclose(a[:, None] * ft + perp, h, atol=1e-14)
    assert sup(np.sum(perp * ft, axis=1)) < 1e-13


def test_grad_scalar():
    for r, scale in ((1.0, 1.0), (2.0, 0.25)):
        errs = []
        for N in (128, 256):
            f = Immersion.circle(N, radius=r)
            th = f.grid.nodes
            assert sup(grad_scalar(f, np.full(N, 3.0))) == 0
            errs.append(sup(grad_scalar(f, np.sin(th)) - scale * np.cos(th)))
        assert errs[1] < 2e-4
        assert order(*errs) == pytest.approx(2, abs=0.05)
