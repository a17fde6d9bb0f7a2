import numpy as np
import pytest

from plasmonic.errors import InvalidValue, ResolutionTooLow
from plasmonic.geometry import (
    GenericParametricChart,
    RevolutionChart,
    Sphere,
    Spheroid,
    TorusChart,
    build_quadrature_mesh,
    check_assumption_A,
    geometry_table,
    local_geometry,
    random_convex_perturbation,
)


def ellipsoid_gauss_curvature(x, a, c):
    # K = 1 / (a^2 b^2 c^2 (x^2/a^4 + y^2/b^4 + z^2/c^4)^2) with b = a
    s = (x[..., 0] ** 2 + x[..., 1] ** 2) / a**4 + x[..., 2] ** 2 / c**4
    return 1.0 / (a**4 * c**2 * s**2)


def test_sphere_is_umbilic_with_outward_normal(sphere, rng):
    for u in rng.uniform([0.1, 0.0], [np.pi - 0.1, 2 * np.pi], size=(10, 2)):
        g = local_geometry(sphere, u)
        assert np.allclose(g.kappas, [1.0, 1.0])
        assert np.isclose(g.H_mean, 1.0)
        assert np.allclose(g.nu, g.x)


def test_spheroid_curvature_matches_ellipsoid_formula(spheroid, rng):
    for u in rng.uniform([0.05, 0.0], [np.pi - 0.05, 2 * np.pi], size=(20, 2)):
        g = local_geometry(spheroid, u)
        assert np.isclose(np.prod(g.kappas), ellipsoid_gauss_curvature(g.x, 1.0, 2.0), rtol=1e-10)


def test_spheroid_equator_and_pole(spheroid):
    eq = local_geometry(spheroid, (np.pi / 2, 0.4))
    assert np.allclose(eq.kappas, [0.25, 1.0])
    pole = local_geometry(spheroid, (0.0, 0.0))
    assert pole.at_pole
    assert np.allclose(pole.kappas, [2.0, 2.0])
    assert np.allclose(pole.nu, [0, 0, 1])


def test_mesh_area_and_volume(spheroid):
    mesh = build_quadrature_mesh(spheroid, (24, 48))
    e = np.sqrt(1 - 1 / 4)
    area = 2 * np.pi * (1 + 2 / e * np.arcsin(e))
    assert np.isclose(mesh.total_area, area, rtol=1e-10)
    assert np.isclose(mesh.signed_volume(), 4 * np.pi * 2 / 3, rtol=1e-10)


def test_torus_area_and_volume():
    mesh = build_quadrature_mesh(TorusChart(2.0, 0.5), (32, 64))
    assert np.isclose(mesh.total_area, 4 * np.pi**2 * 2.0 * 0.5, rtol=1e-12)
    assert np.isclose(mesh.signed_volume(), 2 * np.pi**2 * 2.0 * 0.25, rtol=1e-12)


def test_torus_fails_assumption_A():
    chart = TorusChart(2.0, 0.5)
    mesh = build_quadrature_mesh(chart, (16, 32))
    rep = check_assumption_A(chart, mesh)
    assert not rep.holds and rep.worst_margin < 0


def test_generic_chart_reproduces_sphere(sphere):
    gen = GenericParametricChart(["sin(u)*cos(v)", "sin(u)*sin(v)", "cos(u)"])
    u = np.array([0.8, 2.1])
    a, b = local_geometry(gen, u), local_geometry(sphere, u)
    assert np.allclose(a.x, b.x) and np.allclose(a.nu, b.nu) and np.allclose(a.kappas, b.kappas)


def test_generic_chart_orientation_is_fixed():
    # swapping the roles of x and y flips the raw orientation
    gen = GenericParametricChart(["sin(u)*sin(v)", "sin(u)*cos(v)", "cos(u)"])
    g = local_geometry(gen, (1.0, 0.5))
    assert np.allclose(g.nu, g.x)


def test_profile_chart_approximates_sphere():
    t = np.linspace(0, np.pi, 17)
    chart = RevolutionChart.from_profile(np.sin(t), np.cos(t))
    g = local_geometry(chart, (1.1, 0.0))
    assert np.allclose(g.x, [np.sin(1.1), 0, np.cos(1.1)], atol=1e-10)
    assert np.allclose(g.kappas, 1.0, atol=1e-8)


def test_profile_validation():
    with pytest.raises(InvalidValue):
        RevolutionChart.from_profile([0.1, 1, 1, 1, 0], [1, 0.5, 0, -0.5, -1])
    with pytest.raises(InvalidValue):
        RevolutionChart.from_profile([0, 1, 0], [1, 0, -1])


def test_perturbation_is_convex():
    chart = random_convex_perturbation(3, 0.08)
    mesh = build_quadrature_mesh(chart, (16, 32))
    rep = check_assumption_A(chart, mesh)
    assert rep.holds and rep.sampled_consistent


def test_low_resolution_rejected(sphere):
    with pytest.raises(ResolutionTooLow):
        build_quadrature_mesh(sphere, (4, 32))


def test_content_hash_tracks_parameters():
    assert Spheroid(1, 2).content_hash() == Spheroid(1.0, 2.0).content_hash()
    assert Spheroid(1, 2).content_hash() != Spheroid(1, 2.5).content_hash()


def test_geometry_table_shape(sphere_mesh16):
    tab = geometry_table(sphere_mesh16)
    assert tab.shape == (16 * 32, 11)
