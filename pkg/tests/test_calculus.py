import numpy as np
import pytest

from shapegeo.calculus import Grid, d_theta, integrate, interp_periodic
from shapegeo.errors import InputShapeError

from conftest import order, sup


def test_grid_nodes_and_validation():
    g = Grid(16)
    assert g.nodes[1] == pytest.approx(2 * np.pi / 16)
    assert g.spacing == pytest.approx(2 * np.pi / 16)
    for bad in (6, 15, 0):
        with pytest.raises(Exception):
            Grid(bad)


def test_d_theta_constant_is_zero():
    g = Grid(32)
    assert np.all(d_theta(g, np.ones(32)) == 0)


def test_d_theta_sine():
    g = Grid(256)
    assert sup(d_theta(g, np.sin(g.nodes)) - np.cos(g.nodes)) < 1e-3


def test_d_theta_second_order():
    errs = []
    for N in (64, 128):
        g = Grid(N)
        errs.append(sup(d_theta(g, np.cos(3 * g.nodes)) + 3 * np.sin(3 * g.nodes)))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.02)


def test_d_theta_length_mismatch():
    with pytest.raises(InputShapeError):
        d_theta(Grid(16), np.zeros(15))


def test_summation_by_parts_and_fundamental_theorem(rng):
    g = Grid(64)
    u, v = rng.standard_normal((2, 64))
    assert np.dot(d_theta(g, u), v) == pytest.approx(-np.dot(u, d_theta(g, v)), abs=1e-13)
    assert integrate(g, d_theta(g, u)) == pytest.approx(0, abs=1e-13)


def test_integrate_examples():
    g = Grid(64)
    th = g.nodes
    assert integrate(g, np.ones(64)) == pytest.approx(2 * np.pi, abs=1e-14)
    assert abs(integrate(g, np.cos(th))) < 1e-14
    assert integrate(g, 2 + np.sin(2 * th)) == pytest.approx(4 * np.pi, abs=1e-12)
    # exact for trigonometric polynomials of degree < N/2
    assert integrate(g, np.cos(31 * th) ** 2) == pytest.approx(np.pi, abs=1e-12)
    with pytest.raises(InputShapeError):
        integrate(g, np.ones(63))


def test_interp_periodic():
    g = Grid(128)
    th = g.nodes
    assert interp_periodic(g, np.full(128, 2.5), 1.234) == pytest.approx(2.5, abs=1e-14)
    u = np.sin(th) + 0.3 * np.cos(5 * th)
    assert np.allclose(interp_periodic(g, u, th), u, atol=1e-14, rtol=0)
    assert interp_periodic(g, np.sin(th), np.pi / 7) == pytest.approx(np.sin(np.pi / 7), abs=1e-6)
    # wrapped modulo 2 pi
    assert interp_periodic(g, u, 0.3 + 4 * np.pi) == pytest.approx(interp_periodic(g, u, 0.3), abs=1e-14)


def test_interp_periodic_c1_across_nodes():
    g = Grid(32)
    u = np.cos(g.nodes) + 0.2 * np.sin(3 * g.nodes)
    d = 1e-7
    for j in (0, 5, 31):
        t = g.nodes[j]
        left = (interp_periodic(g, u, t) - interp_periodic(g, u, t - d)) / d
        right = (interp_periodic(g, u, t + d) - interp_periodic(g, u, t)) / d
        assert left == pytest.approx(right, abs=1e-5)


def test_interp_fourth_order():
    errs = []
    x = np.linspace(0, 2 * np.pi, 97)
    for N in (32, 64):
        g = Grid(N)
        errs.append(sup(interp_periodic(g, np.sin(2 * g.nodes), x) - np.sin(2 * x)))
    assert order(*errs) > 3.5
