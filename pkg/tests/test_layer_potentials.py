import numpy as np
import pytest

from plasmonic.errors import MeshMismatch, OffsetTooSmall
from plasmonic.layer_potentials import (
    MatrixCache,
    assemble_axisym_blocks,
    assemble_layers,
    cached_layers,
    constant_density_integrals,
    kelley_residual,
    multiplicity_hints,
    np_adjoint,
    resolved_basis,
    symmetrize_np,
    verify_jump_relation,
)


@pytest.fixture(scope="module")
def sphere_layers(sphere_mesh16):
    return assemble_layers(sphere_mesh16)


def test_single_layer_of_constant_on_sphere(sphere_mesh16, sphere_layers):
    # with Gamma = -1/(4 pi r), S[1] = -R on the sphere of radius R
    S, _ = sphere_layers
    assert np.allclose(S @ np.ones(sphere_mesh16.n), -1.0, atol=1e-8)


def test_double_layer_of_constant_is_half(sphere_mesh16, spheroid_mesh16):
    # Gauss: the double layer K (adjoint of K*) maps 1 to 1/2 on any closed surface
    for mesh in (sphere_mesh16, spheroid_mesh16):
        _, K = assemble_layers(mesh)
        assert np.max(np.abs(np_adjoint(K) @ np.ones(mesh.n) - 0.5)) < 1e-3
        # integrated form: int K*[1] dsigma = |surface| / 2
        assert np.isclose(mesh.weights @ (K @ np.ones(mesh.n)), 0.5 * mesh.total_area, rtol=1e-9)


def test_spherical_harmonic_is_eigenfunction(sphere_mesh16, sphere_layers):
    # Y_2 ~ 3z^2 - 1 has NP eigenvalue 1/(2(2*2+1)) = 0.1
    _, K = sphere_layers
    z = sphere_mesh16.nodes[:, 2]
    phi = 3 * z**2 - 1
    assert np.max(np.abs(K @ phi - 0.1 * phi)) < 1e-3


def test_constant_density_integrals(sphere_mesh16):
    # unit sphere: int dsigma / (4 pi |x - y|) = 1 and K*[1] = 1/2
    I, J = constant_density_integrals(sphere_mesh16)
    assert np.allclose(I, -1.0, atol=1e-10)
    assert np.allclose(J, 0.5, atol=1e-10)


def test_kelley_exact_on_sphere(sphere_layers):
    assert kelley_residual(*sphere_layers) < 1e-12


def test_adjoint_transposes_with_weights(sphere_layers):
    _, K = sphere_layers
    Kt = np_adjoint(K)
    w = K.weights
    u, v = np.random.default_rng(1).normal(size=(2, K.n))
    assert np.isclose(np.dot(w * (K @ u), v), np.dot(w * u, Kt @ v))


def test_symmetrized_matrix_is_symmetric(spheroid_mesh16):
    S, K = assemble_layers(spheroid_mesh16)
    sym = symmetrize_np(S, K)
    M = sym.matrix.entries
    assert np.allclose(M, M.T)
    assert sym.symmetry_defect < 1e-2


def test_resolved_basis_is_weight_orthonormal(spheroid_mesh16):
    B = resolved_basis(spheroid_mesh16)
    G = B.matrix.T @ (B.weights[:, None] * B.matrix)
    assert np.allclose(G, np.eye(B.n), atol=1e-10)


def test_blocks_match_full_spectrum(spheroid_mesh16):
    S, K = assemble_layers(spheroid_mesh16)
    blocks = assemble_axisym_blocks(spheroid_mesh16, 16, restrict=False)
    full = np.sort(np.linalg.eigvals(K.entries).real)
    from_blocks = np.sort(np.concatenate(
        [np.linalg.eigvals(b.Kstar.entries).real for b in blocks if b.m >= 0]
        + [np.linalg.eigvals(b.Kstar.entries).real for b in blocks if 0 < b.m < 16]))
    assert from_blocks.size == full.size
    assert np.allclose(full, from_blocks, atol=1e-8)


def test_jump_relation_guard(sphere_mesh16):
    with pytest.raises(OffsetTooSmall):
        verify_jump_relation(sphere_mesh16, np.ones(sphere_mesh16.n), h_off=1e-7)


def test_mesh_mismatch(sphere_mesh16, spheroid_mesh16, sphere_layers):
    from plasmonic.geometry import Sphere, build_quadrature_mesh

    other = build_quadrature_mesh(Sphere(1.0), (12, 24))
    S2, _ = assemble_layers(other)
    with pytest.raises(MeshMismatch):
        kelley_residual(S2, sphere_layers[1])


def test_cache_roundtrip(tmp_path, sphere_mesh16, sphere_layers):
    cache = MatrixCache(str(tmp_path))
    S, K = cached_layers(sphere_mesh16, cache)
    S2, K2 = cached_layers(sphere_mesh16, cache)
    assert S2.meta.get("cached") and np.array_equal(S.entries, S2.entries)
    assert np.array_equal(K2.entries, sphere_layers[1].entries)


def test_multiplicity_hints():
    assert list(multiplicity_hints([0.5, 0.1666, 0.1667, 0.1, 0.1, 0.1])) == [1, 2, 2, 3, 3, 3]
