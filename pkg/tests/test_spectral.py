import numpy as np
import pytest

from plasmonic.errors import DegenerateContrast, InvalidValue, LambdaHalf, ZeroNorm
from plasmonic.layer_potentials import assemble_axisym_blocks, assemble_layers
from plasmonic.spectral import (
    SpectralWindow,
    axisym_eigendecomposition,
    eigenvalue_to_contrast,
    fractional_modulation,
    np_eigendecomposition,
    plasmonic_map,
    rho,
    rho_inv,
    select_window,
    sobolev_normalizer,
)


@pytest.fixture(scope="module")
def sphere_mesh32(sphere):
    from plasmonic.geometry import build_quadrature_mesh

    return build_quadrature_mesh(sphere, (32, 64))


@pytest.fixture(scope="module")
def sphere_system(sphere_mesh32):
    S, K = assemble_layers(sphere_mesh32)
    return np_eigendecomposition(S, K), S


def test_sphere_eigenvalues_and_normalizers(sphere_system):
    es, _ = sphere_system
    for n in range(4):
        lam = 1 / (2 * (2 * n + 1))
        group = [p for p in es.pairs if abs(p.lambda_tilde - lam) < 1e-3]
        assert len(group) == 2 * n + 1
        # E = -S acts on degree-n harmonics as 1/(2n+1), so c = 1/<E phi, phi> = 2n+1
        assert np.allclose([p.c for p in group], 2 * n + 1, rtol=1e-3)


def test_pairs_sorted_by_magnitude(sphere_system):
    lam = np.abs(sphere_system[0].eigenvalues)
    assert np.all(np.diff(lam) <= 1e-12)


def test_eigenvectors_are_unit_l2(sphere_system, sphere_mesh32):
    w = sphere_mesh32.weights
    for p in sphere_system[0].pairs[:10]:
        assert np.isclose(w @ p.phi**2, 1.0)


def test_modulation_on_harmonic(sphere_mesh32, sphere_system):
    _, S = sphere_system
    energy = sphere_system[0].energy
    z = sphere_mesh32.nodes[:, 2]
    for alpha in (-0.5, 0.5, 1.0):
        # |D|^alpha z = (2E)^(-alpha) z and E z = z / 3
        out = fractional_modulation(alpha, energy, z)
        assert np.allclose(out, (2 / 3) ** (-alpha) * z, atol=1e-3)
    assert np.array_equal(fractional_modulation(0, energy, z), z)


def test_modulation_composes(sphere_mesh32, sphere_system):
    energy = sphere_system[0].energy
    f = np.exp(sphere_mesh32.nodes[:, 0])
    a = fractional_modulation(0.3, energy, fractional_modulation(-0.8, energy, f))
    b = fractional_modulation(-0.5, energy, f)
    assert np.allclose(a, b, atol=1e-10)


def test_modulation_range():
    with pytest.raises(InvalidValue):
        fractional_modulation(2.5, None, np.ones(3))


def test_sobolev_normalizer_rejects_zero(sphere_system):
    energy = sphere_system[0].energy
    with pytest.raises(ZeroNorm):
        sobolev_normalizer(energy, np.zeros(sphere_system[1].n))


def test_plasmonic_map_roundtrip():
    for lam in (-0.3, 0.0, 0.1, 0.49):
        gc = eigenvalue_to_contrast(lam, 1.0)
        assert np.isclose(plasmonic_map(gc, 1.0), lam)
    with pytest.raises(DegenerateContrast):
        plasmonic_map(2.0, 2.0)
    with pytest.raises(LambdaHalf):
        eigenvalue_to_contrast(0.5, 1.0)


def test_rho_inverse():
    r = np.linspace(0, 20, 50)
    assert np.allclose(rho_inv(rho(r)), r)


def test_window_selection_bounds(sphere_system):
    es, _ = sphere_system
    win = SpectralWindow(0.1, 0.2, 0.8)
    lo, hi = win.lambda_bounds()
    sel = select_window(es.pairs, win)
    lam = np.abs([p.lambda_tilde for p in sel.pairs])
    assert np.all((lam >= lo - 1e-15) & (lam <= hi + 1e-15))
    outside = [p for p in es.pairs if p not in sel.pairs]
    assert all(not (lo <= abs(p.lambda_tilde) <= hi) for p in outside)


def test_window_validation():
    with pytest.raises(InvalidValue):
        SpectralWindow(0.1, 0.9, 0.2)
    with pytest.raises(InvalidValue):
        SpectralWindow(-1, 0.1, 0.2)


def test_m_window_needs_blocks(sphere_system):
    with pytest.raises(InvalidValue):
        select_window(sphere_system[0].pairs, SpectralWindow(0.1, 0.0, 1.0, m_interval=(0, 1)))


def test_block_system_matches_full(sphere_mesh32, sphere_system):
    es, _ = sphere_system
    bes = axisym_eigendecomposition(assemble_axisym_blocks(sphere_mesh32, 32), sphere_mesh32)
    top = 25
    assert np.allclose(np.sort(bes.eigenvalues)[::-1][:top], np.sort(es.eigenvalues)[::-1][:top], atol=1e-10)
    # block pairs carry their order and rebuild to unit-norm nodal vectors
    w = sphere_mesh32.weights
    for p in bes.pairs[:12]:
        assert p.m is not None
        assert np.isclose(w @ bes.nodal(p) ** 2, 1.0, rtol=1e-10)
