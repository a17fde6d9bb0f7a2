"""Nystrom discretization of the single-layer and Neumann-Poincare operators.

Matrices act on nodal values and already include the quadrature weights:
``S[i, j] = Gamma(x_i - x_j) w_j`` for ``i != j``, with
``Gamma(x) = -1 / (4 pi |x|)``.  Inner products on the surface are
``<u, v> = sum_i u_i v_i w_i``.

Singular correction
-------------------
The diagonal entry of each row is chosen so that the row applied to the
constant density reproduces the exact integral ``int Gamma(x_i - y) dsigma(y)``
(and likewise for the NP kernel).  Those constant-density integrals are
computed with a target-centred rule: the chart is viewed as a map of the
unit sphere, the sphere is rotated so that the target sits at the north
pole, and a Gauss-Legendre x trapezoid rule is used in the rotated polar
angles.  In these coordinates the ``1/r`` singularity is cancelled by the
polar area factor, so the rule converges spectrally.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from .errors import (
    MeshMismatch,
    MeshTooLarge,
    NotAxisymmetric,
    NotPositiveDefinite,
    OffsetTooSmall,
    UnsupportedTopology,
)
from .geometry import QuadratureMesh, gauss_legendre, trapezoid_periodic

FOUR_PI = 4.0 * np.pi
MAX_NODES = 8192
ROW_BLOCK = 256


@dataclass
class OperatorMatrix:
    entries: np.ndarray
    kind: str
    mesh: QuadratureMesh | None
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.entries.shape[0]

    def __matmul__(self, other):
        return self.entries @ other


# ----------------------------------------------------------------------------
# target-centred quadrature
# ----------------------------------------------------------------------------


def rotations_to(dirs):
    """Rotation matrices (B, 3, 3) taking the north pole to each unit vector."""
    dirs = np.atleast_2d(dirs)
    B = dirs.shape[0]
    v = np.stack([-dirs[:, 1], dirs[:, 0], np.zeros(B)], -1)  # e_z x d
    s2 = np.sum(v * v, -1)
    c = dirs[:, 2]
    vx = np.zeros((B, 3, 3))
    vx[:, 0, 1], vx[:, 0, 2] = -v[:, 2], v[:, 1]
    vx[:, 1, 0], vx[:, 1, 2] = v[:, 2], -v[:, 0]
    vx[:, 2, 0], vx[:, 2, 1] = -v[:, 1], v[:, 0]
    safe = np.where(s2 < 1e-28, 1.0, s2)
    fac = ((1 - c) / safe)[:, None, None]
    R = np.eye(3)[None] + vx + vx @ vx * fac
    north = (s2 < 1e-28) & (c > 0)
    south = (s2 < 1e-28) & (c <= 0)
    R[north] = np.eye(3)
    R[south] = np.diag([1.0, -1.0, -1.0])
    return R


@dataclass(frozen=True)
class PolarRule:
    """Local rule on the unit sphere around the north pole."""

    dirs: np.ndarray  # (P, 3)
    weights: np.ndarray  # (P,) includes sin(theta')

    @classmethod
    def uniform(cls, n_theta=24, n_phi=48):
        th, wt = gauss_legendre(n_theta, 0.0, np.pi)
        return cls._tensor(th, wt, n_phi)

    @classmethod
    def graded(cls, scale, n_per_panel=10, n_phi=48):
        """Geometric panels in the polar angle, refined down to ``scale``."""
        scale = float(np.clip(scale, 1e-6, np.pi / 4))
        edges = [0.0, scale]
        while edges[-1] * 2 < np.pi:
            edges.append(edges[-1] * 2)
        edges.append(np.pi)
        th, wt = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            x, w = gauss_legendre(n_per_panel, a, b)
            th.append(x)
            wt.append(w)
        return cls._tensor(np.concatenate(th), np.concatenate(wt), n_phi)

    @classmethod
    def _tensor(cls, th, wt, n_phi):
        ph, wp = trapezoid_periodic(n_phi)
        TH, PH = np.meshgrid(th, ph, indexing="ij")
        st = np.sin(TH)
        d = np.stack([st * np.cos(PH), st * np.sin(PH), np.cos(TH)], -1).reshape(-1, 3)
        w = (st * wt[:, None] * wp[None, :]).ravel()
        return cls(d, w)


def _node_dirs(mesh):
    th, ph = mesh.geom.u[:, 0], mesh.geom.u[:, 1]
    return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], -1)


def _require_sphere_like(mesh):
    if not mesh.chart.polar:
        raise UnsupportedTopology(
            f"singular quadrature needs a polar (sphere-like) chart, got {mesh.chart.kind}"
        )


def constant_density_integrals(mesh, targets=None, rule=None, batch=64):
    """Exact-to-quadrature ``int Gamma(x_i - y) dsigma`` and the NP analogue.

    Returns ``(I, J)`` for the selected target node indices, where
    ``J_i = int <x_i - y, nu(x_i)> / (4 pi |x_i - y|^3) dsigma(y)``.
    """
    _require_sphere_like(mesh)
    rule = rule or PolarRule.uniform()
    idx = np.arange(mesh.n) if targets is None else np.asarray(targets)
    dirs = _node_dirs(mesh)[idx]
    x0 = mesh.nodes[idx]
    n0 = mesh.normals[idx]
    I = np.empty(idx.size)
    J = np.empty(idx.size)
    for s in range(0, idx.size, batch):
        sl = slice(s, s + batch)
        R = rotations_to(dirs[sl])
        dd = np.einsum("bij,pj->bpi", R, rule.dirs)
        y, jac = mesh.chart.sphere_map(dd)
        diff = x0[sl, None, :] - y
        r = np.linalg.norm(diff, axis=-1)
        ww = rule.weights[None, :] * jac
        I[sl] = -np.sum(ww / r, axis=1) / FOUR_PI
        J[sl] = np.sum(np.einsum("bpk,bk->bp", diff, n0[sl]) / r**3 * ww, axis=1) / FOUR_PI
    return I, J


# ----------------------------------------------------------------------------
# assembly
# ----------------------------------------------------------------------------


def _kernel_rows(xt, nt, xs, ws, k=0.0, self_index=None):
    """Single-layer and NP kernel rows (targets xt with normals nt, sources xs).

    Entries where target and source coincide are left at zero.
    """
    diff = xt[:, None, :] - xs[None, :, :]
    r = np.linalg.norm(diff, axis=-1)
    coincide = r < 1e-14 if self_index is None else self_index
    rs = np.where(coincide, 1.0, r)
    proj = np.einsum("tsk,tk->ts", diff, nt)
    if k == 0:
        S = -1.0 / (FOUR_PI * rs)
        K = proj / (FOUR_PI * rs**3)
    else:
        e = np.exp(1j * k * rs)
        S = -e / (FOUR_PI * rs)
        K = (1 - 1j * k * rs) * e * proj / (FOUR_PI * rs**3)
    S = np.where(coincide, 0.0, S) * ws[None, :]
    K = np.where(coincide, 0.0, K) * ws[None, :]
    return S, K


def _assemble_pair(mesh, k=0.0, rule=None):
    if mesh.n > MAX_NODES:
        raise MeshTooLarge(f"{mesh.n} nodes exceeds the dense limit {MAX_NODES}")
    _require_sphere_like(mesh)
    N = mesh.n
    x, nu, w = mesh.nodes, mesh.normals, mesh.weights
    dtype = float if k == 0 else complex
    S = np.empty((N, N), dtype)
    K = np.empty((N, N), dtype)
    I, J = constant_density_integrals(mesh, rule=rule)
    for s in range(0, N, ROW_BLOCK):
        rows = np.arange(s, min(N, s + ROW_BLOCK))
        eye = np.zeros((rows.size, N), bool)
        eye[np.arange(rows.size), rows] = True
        # static part with the diagonal correction
        S0, K0 = _kernel_rows(x[rows], nu[rows], x, w, 0.0, eye)
        S0[eye] = I[rows] - S0.sum(1)
        K0[eye] = J[rows] - K0.sum(1)
        if k == 0:
            S[rows], K[rows] = S0, K0
        else:
            # the difference kernels are smooth: their diagonal limit is
            # -ik/(4 pi) for S and 0 for K*
            Sk, Kk = _kernel_rows(x[rows], nu[rows], x, w, k, eye)
            S00, K00 = _kernel_rows(x[rows], nu[rows], x, w, 0.0, eye)
            dS = Sk - S00
            dS[eye] = -1j * k / FOUR_PI * w[rows]
            S[rows] = S0 + dS
            K[rows] = K0 + (Kk - K00)
    return S, K


def assemble_single_layer(mesh, rule=None) -> OperatorMatrix:
    """Single-layer operator S with the constant-density diagonal correction."""
    S, _ = _assemble_pair(mesh, 0.0, rule)
    return OperatorMatrix(S, "SingleLayer", mesh, mesh.weights, {"correction": "target-centred polar rule"})


def assemble_np(mesh, rule=None) -> OperatorMatrix:
    """Neumann-Poincare operator K* (kernel <x - y, nu(x)> / (4 pi |x - y|^3))."""
    _, K = _assemble_pair(mesh, 0.0, rule)
    return OperatorMatrix(K, "NeumannPoincare", mesh, mesh.weights, {"correction": "target-centred polar rule"})


def assemble_layers(mesh, rule=None):
    """Both static operators from a single pass over the kernel."""
    S, K = _assemble_pair(mesh, 0.0, rule)
    meta = {"correction": "target-centred polar rule"}
    return (
        OperatorMatrix(S, "SingleLayer", mesh, mesh.weights, dict(meta)),
        OperatorMatrix(K, "NeumannPoincare", mesh, mesh.weights, dict(meta)),
    )


def np_adjoint(Kstar: OperatorMatrix) -> OperatorMatrix:
    """Discrete L^2(dsigma) adjoint K of K*: ``K_ij = K*_ji w_j / w_i``."""
    w = Kstar.weights
    K = Kstar.entries.T * w[None, :] / w[:, None]
    return OperatorMatrix(K, "NeumannPoincareAdjointTranspose", Kstar.mesh, w, dict(Kstar.meta))


# ----------------------------------------------------------------------------
# resolved subspace, energy form and Kelley symmetrization
# ----------------------------------------------------------------------------


@dataclass
class ResolvedBasis:
    """Weight-orthonormal columns spanning the densities a mesh resolves.

    On a polar tensor mesh the rings near the poles carry many azimuthal
    nodes on a tiny circle; high azimuthal orders there are not resolved by
    the polar spacing and the Nystrom single layer loses definiteness on
    them.  Ring ``i`` keeps the orders ``|m| <= cap_i``, with ``cap_i`` the
    number of polar spacings that fit in the ring's radius times pi.
    Columns satisfy ``B^T W B = I``.
    """

    matrix: np.ndarray  # (N, n)
    weights: np.ndarray  # (N,)
    ring: np.ndarray  # (n,) ring index of each column
    m: np.ndarray  # (n,) signed azimuthal order (negative = sine phase)

    @property
    def n(self):
        return self.matrix.shape[1]

    def coeffs(self, f):
        return self.matrix.T @ (self.weights[:, None] * f if f.ndim == 2 else self.weights * f)

    def nodal(self, a):
        return self.matrix @ a

    def compress(self, op: OperatorMatrix):
        """Galerkin compression ``B^T W A B``."""
        return self.matrix.T @ (self.weights[:, None] * (op.entries @ self.matrix))


def identity_basis(weights):
    w = np.asarray(weights, float)
    n = w.size
    return ResolvedBasis(np.diag(1.0 / np.sqrt(w)), w, np.arange(n), np.zeros(n, int))


def mode_caps(mesh, factor=1.0):
    """Largest resolved azimuthal order on each ring of a polar tensor mesh."""
    n1, n2 = mesh.resolution
    X1 = mesh.geom.tangent_basis[:, 0, :].reshape(n1, n2, 3)
    X2 = mesh.geom.tangent_basis[:, 1, :].reshape(n1, n2, 3)
    ring_radius = np.linalg.norm(X2, axis=-1).mean(1)  # |X_phi| = ring circumference / 2 pi
    meridian = np.sum(mesh.w1 * np.linalg.norm(X1, axis=-1).mean(1))
    caps = np.floor(factor * ring_radius * n1 * np.pi / meridian + 1e-9).astype(int)
    return np.minimum(caps, n2 // 2)


def resolved_basis(mesh, factor=1.0) -> ResolvedBasis:
    """Ring-wise azimuthal Fourier basis truncated at :func:`mode_caps`."""
    if not mesh.chart.polar:
        return identity_basis(mesh.weights)
    n1, n2 = mesh.resolution
    caps = mode_caps(mesh, factor)
    ph = mesh.u2
    W = mesh.weights.reshape(n1, n2)
    cols, ring, order = [], [], []
    for i in range(n1):
        ms = [0]
        for m in range(1, caps[i] + 1):
            ms.append(m)
            if 2 * m != n2:
                ms.append(-m)
        F = np.stack([np.cos(m * ph) if m >= 0 else np.sin(-m * ph) for m in ms], -1)
        G = F.T @ (W[i][:, None] * F)
        L = np.linalg.cholesky(G)
        Fo = np.linalg.solve(L, F.T).T  # weight-orthonormal columns
        block = np.zeros((mesh.n, len(ms)))
        block[i * n2:(i + 1) * n2] = Fo
        cols.append(block)
        ring += [i] * len(ms)
        order += ms
    return ResolvedBasis(np.concatenate(cols, 1), mesh.weights, np.array(ring), np.array(order))


def kelley_residual(S: OperatorMatrix, Kstar: OperatorMatrix) -> float:
    """Relative defect ``||S K* - K S|| / ||S K*||`` (zero in the continuum)."""
    _same_space(S, Kstar)
    SK = S.entries @ Kstar.entries
    KS = np_adjoint(Kstar).entries @ S.entries
    return float(np.linalg.norm(SK - KS) / np.linalg.norm(SK))


def _same_space(A: OperatorMatrix, B: OperatorMatrix):
    if A.entries.shape != B.entries.shape or not np.array_equal(A.weights, B.weights):
        raise MeshMismatch("operators live on different meshes")


@dataclass
class EnergyForm:
    """The positive energy form E = -S on the resolved subspace.

    Coefficients refer to the orthonormal columns of ``basis``; ``vals`` and
    ``vecs`` diagonalize the compressed energy matrix.
    """

    basis: ResolvedBasis
    vals: np.ndarray
    vecs: np.ndarray

    @classmethod
    def from_single_layer(cls, S: OperatorMatrix, basis: ResolvedBasis | None = None):
        basis = basis or identity_basis(S.weights)
        Ec = -basis.compress(S)
        Ec = 0.5 * (Ec + Ec.T)
        vals, vecs = np.linalg.eigh(Ec)
        if vals[0] <= 0:
            raise NotPositiveDefinite(f"energy matrix has eigenvalue {vals[0]:.3e}")
        return cls(basis, vals, vecs)

    def matrix_power(self, p):
        return (self.vecs * self.vals**p) @ self.vecs.T

    def apply_power(self, p, f, scale=1.0):
        """``(scale E)^p f`` for nodal ``f``; components outside the basis are dropped."""
        a = self.basis.coeffs(f)
        b = self.vecs @ ((scale * self.vals[:, None] if a.ndim == 2 else scale * self.vals) ** p
                         * (self.vecs.T @ a))
        return self.basis.nodal(b)

    def quadratic(self, f):
        """``<E f, f>`` in the weighted inner product."""
        a = self.basis.coeffs(f)
        t = self.vecs.T @ a
        return np.sum(self.vals[:, None] * t * t, 0) if a.ndim == 2 else float(self.vals @ (t * t))


@dataclass
class Symmetrized:
    matrix: OperatorMatrix  # symmetric, in energy-orthonormal coordinates
    plain: np.ndarray  # compressed K* before symmetrization (same coordinates as the basis)
    energy: EnergyForm
    kelley_residual: float
    symmetry_defect: float  # of the conjugated matrix before explicit symmetrization

    def pull_back(self, v):
        """Nodal densities of eigenvectors of the symmetric matrix."""
        return self.energy.basis.nodal(self.energy.vecs @ ((self.energy.vecs.T @ v)
                                       / (np.sqrt(self.energy.vals)[:, None] if v.ndim == 2
                                          else np.sqrt(self.energy.vals))))


def symmetrize_np(S: OperatorMatrix, Kstar: OperatorMatrix, basis: ResolvedBasis | None = None) -> Symmetrized:
    """Energy-conjugated, explicitly symmetrized NP matrix.

    With the compressed energy ``Ec`` and NP matrix ``Kc`` the product
    ``Ec Kc`` is symmetric exactly when ``S K* = K S``; the returned matrix
    is ``Ec^-1/2 sym(Ec Kc) Ec^-1/2``.  The basis defaults to the mesh's
    resolved subspace.
    """
    _same_space(S, Kstar)
    if basis is None:
        basis = resolved_basis(S.mesh) if S.mesh is not None else identity_basis(S.weights)
    energy = EnergyForm.from_single_layer(S, basis)
    Kc = basis.compress(Kstar)
    half, ihalf = energy.matrix_power(0.5), energy.matrix_power(-0.5)
    M = half @ Kc @ ihalf
    defect = float(np.linalg.norm(M - M.T) / np.linalg.norm(M))
    B = energy.matrix_power(1.0) @ Kc
    Msym = ihalf @ (0.5 * (B + B.T)) @ ihalf
    Msym = 0.5 * (Msym + Msym.T)
    out = OperatorMatrix(Msym, "SymmetrizedNP", S.mesh, np.ones(basis.n), {"basis_dim": basis.n})
    kr = kelley_residual(S, Kstar) if S.mesh is not None else float("nan")
    return Symmetrized(out, Kc, energy, kr, defect)


# ----------------------------------------------------------------------------
# jump relations
# ----------------------------------------------------------------------------


class GridInterpolant:
    """Spectral interpolant of nodal data on a polar tensor mesh.

    Trigonometric in the azimuth, barycentric polynomial on the
    Gauss-Legendre polar nodes.
    """

    def __init__(self, mesh, values):
        n1, n2 = mesh.resolution
        coef = np.fft.fft(np.asarray(values, float).reshape(n1, n2), axis=1) / n2
        self.modes = np.fft.fftfreq(n2, 1.0 / n2)
        self.poly = BarycentricInterpolator(mesh.u1, coef)

    def __call__(self, th, ph):
        c = self.poly(th)  # (P, n2)
        return np.real(np.sum(c * np.exp(1j * np.multiply.outer(ph, self.modes)), -1))


def _potential_near(mesh, interp, i, offsets, n_per_panel=10, n_phi=48):
    """Single-layer potential at ``x_i + t nu_i`` for each offset ``t``."""
    d0 = _node_dirs(mesh)[i]
    R = rotations_to(d0[None])[0]
    x0, n0 = mesh.nodes[i], mesh.normals[i]
    out = []
    for t in offsets:
        rule = PolarRule.graded(abs(t) if t != 0 else 1e-3, n_per_panel, n_phi)
        dd = rule.dirs @ R.T
        y, jac = mesh.chart.sphere_map(dd)
        th = np.arccos(np.clip(dd[:, 2], -1, 1))
        ph = np.arctan2(dd[:, 1], dd[:, 0])
        dens = interp(th, ph)
        r = np.linalg.norm(x0 + t * n0 - y, axis=-1)
        out.append(-np.sum(rule.weights * jac * dens / r) / FOUR_PI)
    return np.array(out)


@dataclass
class JumpResidual:
    exterior: float  # max |d_nu S[phi]^+ - (1/2 + K*) phi|
    interior: float  # max |d_nu S[phi]^- - (-1/2 + K*) phi|
    jump: float  # max |(d_nu S^+ - d_nu S^-) - phi|
    targets: np.ndarray

    @property
    def max(self):
        return max(self.exterior, self.interior)


def verify_jump_relation(mesh, density, h_off=None, Kstar=None, targets=None, n_targets=48):
    """Compare one-sided normal derivatives of S[phi] with (+-1/2 + K*) phi.

    The off-surface potential is evaluated with a graded target-centred rule,
    so the offsets may be much smaller than the node spacing.  Derivatives use
    the fourth-order one-sided stencil on offsets ``0, h, 2h, 3h, 4h``.
    """
    _require_sphere_like(mesh)
    diam = mesh.diameter
    if h_off is None:
        h_off = 0.01 * diam
    if h_off < 1e-4 * diam:
        raise OffsetTooSmall(f"h_off={h_off:g} below the guard {1e-4 * diam:g}")
    density = np.asarray(density, float)
    if Kstar is None:
        Kstar = assemble_np(mesh)
    Kphi = Kstar.entries @ density
    if targets is None:
        targets = np.unique(np.linspace(0, mesh.n - 1, min(n_targets, mesh.n)).astype(int))
    interp = GridInterpolant(mesh, density)
    stencil = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
    steps = np.arange(5) * h_off
    ext, inn = [], []
    for i in targets:
        up = _potential_near(mesh, interp, i, steps)
        down = _potential_near(mesh, interp, i, -steps)
        ext.append(stencil @ up / h_off)
        inn.append(-(stencil @ down) / h_off)
    ext, inn = np.array(ext), np.array(inn)
    phi = density[targets]
    return JumpResidual(
        exterior=float(np.max(np.abs(ext - (0.5 * phi + Kphi[targets])))),
        interior=float(np.max(np.abs(inn - (-0.5 * phi + Kphi[targets])))),
        jump=float(np.max(np.abs(ext - inn - phi))),
        targets=np.asarray(targets),
    )


# ----------------------------------------------------------------------------
# azimuthal Fourier blocks
# ----------------------------------------------------------------------------


def _cos_transform(A):
    if np.iscomplexobj(A):
        return np.fft.rfft(A.real, axis=2).real + 1j * np.fft.rfft(A.imag, axis=2).real
    return np.fft.rfft(A, axis=2).real


@dataclass
class AxisymBlock:
    """Mode-``m`` restriction of S and K* to densities ``v(u1) e^{i m u2}``.

    ``rings`` lists the profile nodes on which order ``|m|`` is resolved;
    block matrices act on the values there.
    """

    m: int
    S: OperatorMatrix
    Kstar: OperatorMatrix
    rings: np.ndarray
    u1: np.ndarray
    n_azimuth: int

    def reconstruct(self, v):
        """Nodal values on the full mesh: ``v cos(m u2)`` for m >= 0, ``v sin(|m| u2)`` otherwise."""
        ph = 2 * np.pi * np.arange(self.n_azimuth) / self.n_azimuth
        ang = np.cos(self.m * ph) if self.m >= 0 else np.sin(-self.m * ph)
        full = np.zeros(self.u1.size)
        full[self.rings] = v
        return np.outer(full, ang).ravel()


def assemble_axisym_blocks(mesh, m_max, rule=None, restrict=True, k=0.0):
    """Per-mode blocks of S and K* on a surface of revolution.

    For the azimuth-0 node of every ring the kernel rows against all mesh
    nodes (diagonal-corrected as in the full assembly) are Fourier
    transformed in the source azimuth, so on matched meshes the blocks are
    exactly the Fourier diagonalization of the full matrices.  Blocks for
    ``-m`` and ``m`` coincide; both are returned.  With ``restrict`` each
    block keeps only rings where order ``|m|`` is resolved.  A nonzero
    wavenumber ``k`` gives the Helmholtz blocks (complex entries).
    """
    if not mesh.chart.axisymmetric:
        raise NotAxisymmetric(f"{mesh.chart.kind} is not a surface of revolution")
    n1, n2 = mesh.resolution
    if m_max > n2 // 2:
        raise MeshMismatch(f"m_max={m_max} exceeds the azimuthal resolution {n2}")
    rows = np.arange(n1) * n2  # the azimuth-0 node on each ring
    x, nu, w = mesh.nodes, mesh.normals, mesh.weights
    eye = np.zeros((n1, mesh.n), bool)
    eye[np.arange(n1), rows] = True
    S0, K0 = _kernel_rows(x[rows], nu[rows], x, w, 0.0, eye)
    I, J = constant_density_integrals(mesh, targets=rows, rule=rule)
    S0[eye] = I - S0.sum(1)
    K0[eye] = J - K0.sum(1)
    if k != 0:
        Sk, Kk = _kernel_rows(x[rows], nu[rows], x, w, k, eye)
        Sr, Kr = _kernel_rows(x[rows], nu[rows], x, w, 0.0, eye)
        dS = Sk - Sr
        dS[eye] = -1j * k / FOUR_PI * w[rows]
        S0 = S0 + dS
        K0 = K0 + (Kk - Kr)
    # rows are even in the source azimuth, so the cosine transform diagonalizes them
    Sf = _cos_transform(S0.reshape(n1, n1, n2))
    Kf = _cos_transform(K0.reshape(n1, n1, n2))
    ring_w = mesh.w1 * mesh.geom.area_element[rows] * 2 * np.pi
    caps = mode_caps(mesh) if restrict else np.full(n1, n2 // 2)
    blocks = []
    for m in range(-m_max, m_max + 1):
        keep = np.flatnonzero(caps >= abs(m))
        if keep.size == 0:
            continue
        ix = np.ix_(keep, keep)
        meta = {"m": m}
        blocks.append(
            AxisymBlock(
                m=m,
                S=OperatorMatrix(Sf[:, :, abs(m)][ix], "SingleLayer", None, ring_w[keep], dict(meta)),
                Kstar=OperatorMatrix(Kf[:, :, abs(m)][ix], "NeumannPoincare", None, ring_w[keep], dict(meta)),
                rings=keep,
                u1=mesh.u1.copy(),
                n_azimuth=n2,
            )
        )
    return blocks


# ----------------------------------------------------------------------------
# cache and spectrum dumps
# ----------------------------------------------------------------------------


class MatrixCache:
    """On-disk cache of assembled matrices keyed by (surface, resolution, kind)."""

    def __init__(self, directory):
        self.dir = directory
        os.makedirs(directory, exist_ok=True)

    def _path(self, mesh, kind):
        key = hashlib.sha256(f"{mesh.key()}|{kind}".encode()).hexdigest()[:24]
        return os.path.join(self.dir, f"{kind}-{key}.npy")

    def get(self, mesh, kind):
        p = self._path(mesh, kind)
        if os.path.exists(p):
            return np.load(p)
        return None

    def put(self, mesh, kind, arr):
        p = self._path(mesh, kind)
        fd, tmp = tempfile.mkstemp(dir=self.dir, suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            np.save(fh, arr)
        os.replace(tmp, p)


def cached_layers(mesh, cache: MatrixCache | None = None):
    """assemble_layers, reading and filling ``cache`` when given."""
    if cache is not None:
        S, K = cache.get(mesh, "S"), cache.get(mesh, "Kstar")
        if S is not None and K is not None:
            meta = {"correction": "target-centred polar rule", "cached": True}
            return (
                OperatorMatrix(S, "SingleLayer", mesh, mesh.weights, dict(meta)),
                OperatorMatrix(K, "NeumannPoincare", mesh, mesh.weights, dict(meta)),
            )
    S, K = assemble_layers(mesh)
    if cache is not None:
        cache.put(mesh, "S", S.entries)
        cache.put(mesh, "Kstar", K.entries)
    return S, K


def multiplicity_hints(values, tol=1e-3):
    """Size of the cluster (consecutive gaps <= tol in sorted order) of each value."""
    values = np.asarray(values, float)
    order = np.argsort(values)
    sv = values[order]
    labels = np.concatenate([[0], np.cumsum(np.diff(sv) > tol)])
    counts = np.bincount(labels)
    hints = np.empty(values.size, int)
    hints[order] = counts[labels]
    return hints


SPECTRUM_COLUMNS = ["index", "lambda", "multiplicity_hint"]
