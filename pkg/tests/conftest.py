import sys
import numpy as np
import pytest

from shapegeo.ambient import Euclidean, Sphere
from shapegeo.geometry import Immersion
from shapegeo.samples import random_field, random_immersion


def order(err_coarse, err_fine, ratio=2.0):
    """Observed convergence order between two refinement levels."""
    return float(np.log(err_coarse / err_fine) / np.log(ratio))


def sup(a):
    return float(np.max(np.abs(a)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def circle():
    return Immersion.circle(128)


@pytest.fixture
def wobbly(rng):
    return random_immersion(128, rng, degree=4, amp=0.2)


@pytest.fixture
def sphere_curve(rng):
    return random_immersion(128, rng, ambient=Sphere(1.0), degree=4, amp=0.2)


@pytest.fixture
def fields(rng, wobbly):
    return [random_field(wobbly, rng, degree=3) for _ in range(3)]


__all__ = ["order", "sup", "Euclidean", "Sphere"]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
