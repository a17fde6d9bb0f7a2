import numpy as np
import pytest

from plasmonic.geometry import Sphere, Spheroid, build_quadrature_mesh


@pytest.fixture(scope="session")
def sphere():
    return Sphere(1.0)


@pytest.fixture(scope="session")
def spheroid():
    return Spheroid(1.0, 2.0)


@pytest.fixture(scope="session")
def sphere_mesh16(sphere):
    return build_quadrature_mesh(sphere, (16, 32))


@pytest.fixture(scope="session")
def spheroid_mesh16(spheroid):
    return build_quadrature_mesh(spheroid, (16, 32))


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
