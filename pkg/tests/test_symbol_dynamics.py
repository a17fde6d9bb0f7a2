from fractions import Fraction

import numpy as np
import pytest

from plasmonic.errors import AssumptionAViolated, EmptyFiber, NotAxisymmetric, ZeroCovector
from plasmonic.geometry import TorusChart, local_geometry
from plasmonic.symbol_dynamics import (
    CotangentState,
    angular_moment,
    birkhoff_average,
    classify_leaf,
    e2_max,
    embed_state,
    f2_chart,
    hamiltonian_at,
    integrate_flow,
    joint_flow,
    kappa_tilde,
    leaf_average,
    leaf_fiber,
    moment_map_rank,
    principal_symbol_np,
    rational_test,
    solve_leaf_equation,
    start_state_on_leaf,
)


def z_squared(x, xi):
    return x[..., 2] ** 2


def test_sphere_symbol_is_inverse_length(sphere, rng):
    for _ in range(10):
        u = rng.uniform([0.2, 0], [np.pi - 0.2, 2 * np.pi])
        g = local_geometry(sphere, u)
        xi = rng.normal(size=2)
        norm = np.sqrt(xi @ g.g_inv @ xi)
        assert np.isclose(principal_symbol_np(g, xi), 1 / norm, rtol=1e-13)


def test_symbol_along_principal_directions(spheroid, rng):
    # for a covector along the principal direction with curvature k_i the
    # symbol is (sum k - k_i) / |xi|
    g = local_geometry(spheroid, (0.9, 0.4))
    for i in range(2):
        amb = 1.7 * g.principal_dirs[i]
        xi = g.tangent_basis @ amb
        expected = (g.kappas.sum() - g.kappas[i]) / 1.7
        assert np.isclose(principal_symbol_np(g, xi), expected, rtol=1e-12)


def test_fiber_lies_on_unit_level(spheroid):
    g = local_geometry(spheroid, (0.7, 1.3))
    fib = leaf_fiber(g, None, n_samples=32)
    vals = [principal_symbol_np(g, xi) for xi in fib.xi_chart]
    assert np.allclose(vals, 1.0, rtol=1e-12)


def test_kappa_tilde_general_dimension():
    assert np.allclose(kappa_tilde([1.0, 2.0, 4.0]), [6.0, 5.0, 3.0])


def test_sphere_flow_stays_on_great_circle(sphere):
    st = CotangentState([1.1, 0.2], [0.3, 0.5])
    x0, xi0 = embed_state(sphere, st)
    normal = np.cross(x0, xi0)
    tr = integrate_flow(sphere, st, 20.0, n_log=41)
    for z in tr.states:
        x = sphere.position(z[0], z[1])
        assert abs(np.dot(x, normal)) < 1e-9 * np.linalg.norm(normal)
    assert tr.drift_H < 1e-10


def test_f2_flow_is_rotation(spheroid):
    st = CotangentState([1.0, 0.5], [0.2, -0.4])
    end = joint_flow(spheroid, st, (0.0, 0.7))
    assert np.allclose(end.u, [1.0, 0.5 - 0.7], atol=1e-10)
    assert np.allclose(end.xi, st.xi, atol=1e-10)


def test_f2_is_axial_angular_momentum(spheroid):
    st = CotangentState([1.2, 0.3], [0.4, 0.9])
    x, xi = embed_state(spheroid, st)
    assert np.isclose(f2_chart(spheroid, st), angular_moment(x, xi))


def test_moment_map_rank(spheroid):
    assert moment_map_rank(spheroid, CotangentState([1.0, 0.0], [0.4, -0.3])) == 2


def test_flow_guards(sphere):
    with pytest.raises(ZeroCovector):
        integrate_flow(sphere, CotangentState([1.0, 0.0], [0.0, 0.0]), 1.0)
    with pytest.raises(NotAxisymmetric):
        f2_chart(TorusChart(), CotangentState([0.0, 0.0], [1.0, 0.0]))


def test_leaf_fiber_errors(sphere):
    inner = local_geometry(TorusChart(2.0, 0.5), (np.pi, 0.0))
    with pytest.raises(AssumptionAViolated):
        leaf_fiber(inner, None)
    with pytest.raises(EmptyFiber):
        leaf_fiber(local_geometry(sphere, (np.pi / 2, 0.0)), 1.5)


@pytest.mark.parametrize("t", [np.pi / 2, 0.6, 2.2])
def test_sphere_leaf_roots(sphere, t):
    # on the unit sphere at polar angle t: e2 = -sin(t) cos(theta)
    e2 = 0.4 * np.sin(t)
    roots = solve_leaf_equation(sphere, t, e2)
    th = np.arccos(-e2 / np.sin(t))
    assert roots.N == 2
    assert np.allclose(np.sort(roots.thetas), np.sort([th, 2 * np.pi - th]), atol=1e-10)


def test_e2_max_matches_brute_force(spheroid):
    value, _ = e2_max(spheroid)
    best = 0.0
    for t in np.linspace(0.05, np.pi - 0.05, 181):
        g = local_geometry(spheroid, (t, 0.0))
        x = g.x
        amb = leaf_fiber(g, None, n_samples=720).ambient()
        best = max(best, np.max(np.abs([angular_moment(x, a) for a in amb])))
    assert value >= best - 1e-9
    assert value - best < 2e-4


def test_rational_test():
    assert rational_test(0.5) == Fraction(1, 2)
    assert rational_test(3 / 7) == Fraction(3, 7)
    assert rational_test(np.pi) is None
    assert rational_test((1 + 5**0.5) / 2) is None


def test_classification_on_sphere(sphere):
    cls = classify_leaf(sphere, 0.5)
    assert cls.tag == "TorusPeriodic"
    assert np.isclose(cls.theta_per, np.pi, atol=1e-8)
    assert cls.convergent == (1, 2) or tuple(cls.convergent) == (1, 2)
    assert classify_leaf(sphere, 1.2).tag == "Empty"


def test_leaf_average_on_sphere(sphere):
    # great circle with inclination i, cos i = e2: mean of z^2 is sin(i)^2 / 2
    st, _ = start_state_on_leaf(sphere, 0.5)
    assert np.isclose(leaf_average(sphere, z_squared, st), 0.375, atol=1e-9)


def test_weighted_birkhoff_beats_plain(sphere):
    st, _ = start_state_on_leaf(sphere, 0.5, t=1.0)
    res = birkhoff_average(sphere, z_squared, st, 60.0, n_checkpoints=3)
    assert abs(res.estimate - 0.375) < 1e-5
    errs = np.abs(res.weighted - 0.375)
    assert errs[-1] < errs[0]


def test_hamiltonian_regularization(sphere):
    u = np.array([[1.0, 0.0]])
    xi = np.array([[2.0, 0.0]])
    raw = hamiltonian_at(sphere, u, xi, regularized=False)[0]
    reg = hamiltonian_at(sphere, u, xi, regularized=True)[0]
    # H is the squared symbol, 1/|xi|^2 on the unit sphere
    assert np.isclose(raw, 0.25)
    assert np.isclose(reg, 1 - np.exp(-0.25))
