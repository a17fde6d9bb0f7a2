import numpy as np
import pytest
from scipy.integrate import quad

from plasmonic.errors import BumpUnresolved, EmptyWindow, InvalidValue
from plasmonic.geometry import Sphere, Spheroid, build_quadrature_mesh, local_geometry
from plasmonic.layer_potentials import assemble_axisym_blocks
from plasmonic.spectral import SpectralWindow, axisym_eigendecomposition
from plasmonic.weyl_concentration import (
    AS_PRINTED,
    CONSISTENT,
    CurvatureVolumeSpec,
    annulus_area,
    annulus_area_closed,
    bump_weights,
    concentration_ratio,
    curvature_volume_G,
    fiber_weighted_volume,
    liouville_fiber_volume,
    phase_space_volume,
    points_per_wavelength,
    predicted_ratio,
    quantum_variance,
    sandwich_check,
    sphere_weyl_count,
    weyl_count,
)


def block_system(chart, res):
    mesh = build_quadrature_mesh(chart, res)
    return axisym_eigendecomposition(assemble_axisym_blocks(mesh, res[1] // 2), mesh)


@pytest.fixture(scope="module")
def sphere_blocks64():
    return block_system(Sphere(1.0), (64, 128))


def fiber_volume_by_quad(kappas, alpha):
    kt = np.array([kappas[1], kappas[0]])  # (sum k) - k_i for two curvatures

    def integrand(a):
        r = kt[0] * np.cos(a) ** 2 + kt[1] * np.sin(a) ** 2
        s2 = kt[0] ** 2 * np.cos(a) ** 2 + kt[1] ** 2 * np.sin(a) ** 2
        return r ** (1 + 2 * alpha) * np.sqrt(4 * s2 - 3 * r**2)

    return quad(integrand, 0, 2 * np.pi, epsabs=1e-13, epsrel=1e-13, limit=200)[0]


def test_unit_sphere_fiber_volume():
    assert np.isclose(fiber_weighted_volume([1.0, 1.0], -0.5), 2 * np.pi, rtol=1e-14)


@pytest.mark.parametrize("kappas,alpha", [([0.25, 1.0], -0.5), ([0.7, 3.0], 0.5), ([1.0, 1.3], 0.0)])
def test_fiber_volume_against_adaptive_quadrature(kappas, alpha):
    assert np.isclose(fiber_weighted_volume(kappas, alpha), fiber_volume_by_quad(kappas, alpha), rtol=1e-10)


def test_leaf_fiber_and_point_routes_agree(spheroid):
    from plasmonic.symbol_dynamics import leaf_fiber

    g = local_geometry(spheroid, (0.8, 0.0))
    via_fiber = fiber_weighted_volume(leaf_fiber(g, None, n_samples=512), -0.5)
    via_point = fiber_weighted_volume(g, -0.5)
    assert np.isclose(via_fiber, via_point, rtol=1e-10)


def test_symbol_scale_rescales_fiber():
    # the fiber scales by sqrt(scale) and V is homogeneous of degree d-1+2 alpha = 2+2 alpha
    k = [0.4, 1.5]
    for scale in (0.25, 4.0):
        for alpha in (-0.5, 0.5):
            assert np.isclose(fiber_weighted_volume(k, alpha, symbol_scale=scale),
                              scale ** (1 + alpha) * fiber_weighted_volume(k, alpha), rtol=1e-12)


def test_sandwich_on_sphere():
    # r = 1 and |grad| = 1 everywhere, so V = G
    sw = sandwich_check([1.0, 1.0], 0.3)
    assert np.isclose(sw.ratio, 1.0) and sw.holds


def test_exponent_conventions():
    assert CurvatureVolumeSpec(-0.5, 3, None, AS_PRINTED).exponent == 1.0
    assert CurvatureVolumeSpec(-0.5, 3, None, CONSISTENT).exponent == 0.0
    # on the unit sphere r = 1 makes the exponent irrelevant
    a = curvature_volume_G([1.0, 1.0], CurvatureVolumeSpec(0.5, 3, None, AS_PRINTED))
    b = curvature_volume_G([1.0, 1.0], CurvatureVolumeSpec(0.5, 3, None, CONSISTENT))
    assert np.isclose(a, b)
    with pytest.raises(InvalidValue):
        CurvatureVolumeSpec(0.0, 4, e2=0.1)


def test_liouville_volume_sphere():
    # half the integral of r^2 over the circle with r = 1
    assert np.isclose(liouville_fiber_volume([1.0, 1.0], -0.5), np.pi)


def test_predicted_ratio_is_reciprocal(spheroid):
    gp, gq = local_geometry(spheroid, (0.0, 0.0)), local_geometry(spheroid, (np.pi / 2, 0.0))
    assert np.isclose(predicted_ratio(gp, gq) * predicted_ratio(gq, gp), 1.0)


def test_annulus_area_two_routes(rng):
    for _ in range(5):
        kt = rng.uniform(0.1, 3.0, 2)
        assert np.isclose(annulus_area(kt, 0.3, 2.0), annulus_area_closed(kt, 0.3, 2.0), rtol=1e-12)


def test_phase_space_volume_sphere():
    mesh = build_quadrature_mesh(Sphere(1.0), (16, 32))
    from plasmonic.spectral import rho_inv

    a, b = rho_inv(0.2), rho_inv(0.8)
    expected = 4 * np.pi * 0.5 * (1 / a - 1 / b) * 2 * np.pi
    assert np.isclose(phase_space_volume(mesh, 0.2, 0.8), expected, rtol=1e-12)


def test_weyl_counts_match_sphere_harmonics(sphere_blocks64):
    sweep = weyl_count(sphere_blocks64, [0.16, 0.08], 0.2, 0.8)
    for rep in sweep.reports:
        assert rep.count == sphere_weyl_count(rep.h, 0.2, 0.8)


def test_bump_weights_unit_mass_and_guard():
    mesh = build_quadrature_mesh(Sphere(1.0), (32, 64))
    w = bump_weights(mesh, [0, 0, 1], 0.6)
    assert np.isclose(w @ mesh.weights, 1.0)
    with pytest.raises(BumpUnresolved):
        bump_weights(mesh, [0, 0, 1], 0.5 * mesh.node_spacing)


def test_sphere_concentration_is_flat(sphere_blocks64):
    rep = concentration_ratio(sphere_blocks64, (0.0, 0.0), (np.pi / 2, 0.0), SpectralWindow(0.08, 0.2, 0.8))
    assert abs(rep.measured_ratio - 1) < 0.05
    assert np.isclose(rep.predicted_ratio, 1.0)


def test_empty_window_raises(sphere_blocks64):
    with pytest.raises(EmptyWindow):
        concentration_ratio(sphere_blocks64, (0.0, 0.0), (1.0, 0.0), SpectralWindow(10.0, 0.9, 0.95))


def test_points_per_wavelength_scales_with_eigenvalue():
    mesh = build_quadrature_mesh(Spheroid(1.0, 2.0), (32, 64))
    assert np.isclose(points_per_wavelength(mesh, 0.02), 2 * points_per_wavelength(mesh, 0.01))


def test_variance_of_constant_vanishes(sphere_blocks64):
    reps = quantum_variance(sphere_blocks64, lambda x: np.ones(len(x)), [0.08, 0.04], 0.2, 0.8)
    assert all(r.variance < 1e-20 for r in reps)


def test_spheroid_pole_variance_decreases():
    es = block_system(Spheroid(1.0, 2.0), (128, 256))

    def pole_bump(x):
        return np.exp(-np.sum((x - [0, 0, 2.0]) ** 2, axis=1) / 0.5)

    v = [r.variance for r in quantum_variance(es, pole_bump, [0.08, 0.04, 0.02], 0.2, 0.8)]
    assert v[0] > v[1] > v[2] > 0


def test_predicted_ratio_ignores_symbol_constant(spheroid):
    gp, gq = local_geometry(spheroid, (0.0, 0.0)), local_geometry(spheroid, (np.pi / 2, 0.0))
    base = predicted_ratio(gp, gq)
    for scale in (0.25, 1 / 16, 4.0):
        assert np.isclose(predicted_ratio(gp, gq, symbol_scale=scale), base, rtol=1e-12)
