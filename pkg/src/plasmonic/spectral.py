"""Eigenpairs of the NP operator, the plasmonic eigenvalue map and |D|^alpha.

Eigenvalues come from the energy-symmetrized NP matrix (see
:func:`plasmonic.layer_potentials.symmetrize_np`), eigenfunctions are pulled
back to nodal densities and normalized in L^2(dsigma).  ``c_i`` is the
inverse single-layer energy ``1 / <E phi, phi>``.

Surfaces of revolution may be decomposed per azimuthal order instead; those
eigenpairs carry ``m`` and their ring profile, and nodal values are built on
demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateContrast,
    InvalidValue,
    LambdaHalf,
    ZeroNorm,
)
from .layer_potentials import (
    AxisymBlock,
    EnergyForm,
    OperatorMatrix,
    ResolvedBasis,
    identity_basis,
    symmetrize_np,
)


def rho(r):
    """Regularization rho(r) = 1 - exp(-r)."""
    return -np.expm1(-np.asarray(r, dtype=float)) if np.ndim(r) else float(-np.expm1(-r))


def rho_inv(y):
    y = np.asarray(y, dtype=float)
    if np.any((y < 0) | (y >= 1)):
        raise InvalidValue("rho takes values in [0, 1)")
    out = -np.log1p(-y)
    return float(out) if out.ndim == 0 else out


@dataclass
class Eigenpair:
    lambda_tilde: float
    phi: np.ndarray | None  # nodal, L^2(dsigma)-normalized; None for lazily built block pairs
    c: float
    index: int
    m: int | None = None
    profile: np.ndarray | None = None  # block coordinates (ring values)
    block: int | None = None  # position in EigenSystem.blocks


@dataclass
class EigenSystem:
    pairs: list
    mesh: object
    energy: EnergyForm | None = None
    blocks: list = field(default_factory=list)
    block_energies: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.pairs)

    @property
    def eigenvalues(self):
        return np.array([p.lambda_tilde for p in self.pairs])

    def nodal(self, pair: Eigenpair):
        if pair.phi is not None:
            return pair.phi
        b = self.blocks[pair.block]
        scale = 1.0 if b.m == 0 else np.sqrt(2.0)
        return scale * b.reconstruct(pair.profile)

    def modulated(self, pair: Eigenpair, alpha):
        """Nodal ``|D|^alpha phi`` with ``|D|^-1 = 2E``."""
        if pair.phi is not None:
            return fractional_modulation(alpha, self.energy, pair.phi)
        b = self.blocks[pair.block]
        v = fractional_modulation(alpha, self.block_energies[pair.block], pair.profile)
        scale = 1.0 if b.m == 0 else np.sqrt(2.0)
        return scale * b.reconstruct(v)

    def modulated_profile(self, pair: Eigenpair, alpha):
        """Block-space ``|D|^alpha`` profile and the block it lives in (block pairs only)."""
        b = self.blocks[pair.block]
        return fractional_modulation(alpha, self.block_energies[pair.block], pair.profile), b


def _sort_key(lam, m, i):
    return (-abs(round(lam, 13)), -round(lam, 13), 0 if m is None else abs(m), 0 if m is None else -np.sign(m), i)


def np_eigendecomposition(S: OperatorMatrix, Kstar: OperatorMatrix, basis: ResolvedBasis | None = None) -> EigenSystem:
    """All eigenpairs of the symmetrized NP operator on the resolved subspace.

    Sorted by ``|lambda|`` descending.  ``diagnostics`` records the largest
    residual against the symmetrized operator, the residual against the plain
    compressed K*, and the distance between the two spectra.
    """
    sym = symmetrize_np(S, Kstar, basis)
    lam, V = np.linalg.eigh(sym.matrix.entries)
    energy = sym.energy
    # pull back: coefficients a = Ec^-1/2 v, nodal phi = B a
    A = energy.vecs @ ((energy.vecs.T @ V) / np.sqrt(energy.vals)[:, None])
    norms = np.linalg.norm(A, axis=0)  # B is weight-orthonormal
    A /= norms
    quad = np.sum(A * (energy.matrix_power(1.0) @ A), 0)
    Phi = energy.basis.nodal(A)
    res_sym = np.linalg.norm(sym.matrix.entries @ V - V * lam, axis=0).max()
    res_plain = np.linalg.norm(sym.plain @ A - A * lam, axis=0).max()
    plain_eigs = np.sort(np.linalg.eigvals(sym.plain).real)
    order = sorted(range(lam.size), key=lambda i: _sort_key(lam[i], None, i))
    pairs = [
        Eigenpair(float(lam[i]), Phi[:, i], float(1.0 / quad[i]), k)
        for k, i in enumerate(order)
    ]
    diag = {
        "basis_dim": energy.basis.n,
        "mesh_nodes": S.n,
        "kelley_residual": sym.kelley_residual,
        "symmetry_defect": sym.symmetry_defect,
        "residual_symmetrized": float(res_sym),
        "residual_plain": float(res_plain),
        "sym_vs_plain": float(np.max(np.abs(np.sort(lam) - plain_eigs))),
    }
    return EigenSystem(pairs, S.mesh, energy, diagnostics=diag)


def axisym_eigendecomposition(blocks: list[AxisymBlock], mesh=None) -> EigenSystem:
    """Eigenpairs from azimuthal blocks, tagged with their order ``m``."""
    raw = []
    energies = []
    diag = {"residual_symmetrized": 0.0, "residual_plain": 0.0, "sym_vs_plain": 0.0, "basis_dim": 0}
    for bi, b in enumerate(blocks):
        basis = identity_basis(b.S.weights)
        sym = symmetrize_np(b.S, b.Kstar, basis)
        energies.append(sym.energy)
        lam, V = np.linalg.eigh(sym.matrix.entries)
        e = sym.energy
        A = e.vecs @ ((e.vecs.T @ V) / np.sqrt(e.vals)[:, None])
        A /= np.linalg.norm(A, axis=0)
        quad = np.sum(A * (e.matrix_power(1.0) @ A), 0)
        prof = basis.nodal(A)
        diag["residual_symmetrized"] = max(diag["residual_symmetrized"],
                                           float(np.linalg.norm(sym.matrix.entries @ V - V * lam, axis=0).max()))
        diag["residual_plain"] = max(diag["residual_plain"],
                                     float(np.linalg.norm(sym.plain @ A - A * lam, axis=0).max()))
        plain = np.sort(np.linalg.eigvals(sym.plain).real)
        diag["sym_vs_plain"] = max(diag["sym_vs_plain"], float(np.max(np.abs(np.sort(lam) - plain))))
        diag["basis_dim"] += basis.n
        for j in range(lam.size):
            raw.append((float(lam[j]), b.m, prof[:, j], float(1.0 / quad[j]), bi))
    order = sorted(range(len(raw)), key=lambda i: _sort_key(raw[i][0], raw[i][1], i))
    pairs = [
        Eigenpair(raw[i][0], None, raw[i][3], k, m=raw[i][1], profile=raw[i][2], block=raw[i][4])
        for k, i in enumerate(order)
    ]
    return EigenSystem(pairs, mesh, None, blocks=list(blocks), block_energies=energies, diagnostics=diag)


# ----------------------------------------------------------------------------
# plasmonic eigenvalue algebra
# ----------------------------------------------------------------------------


def plasmonic_map(gamma_c, gamma_m):
    """lambda(gamma_c, gamma_m) = (gamma_c + gamma_m) / (2 (gamma_c - gamma_m))."""
    if gamma_c == gamma_m:
        raise DegenerateContrast("gamma_c equals gamma_m")
    return (gamma_c + gamma_m) / (2 * (gamma_c - gamma_m))


def eigenvalue_to_contrast(lam, gamma_m):
    """Inverse of :func:`plasmonic_map` in gamma_c: gamma_m (2 lam + 1) / (2 lam - 1)."""
    if lam == 0.5:
        raise LambdaHalf("lambda = 1/2 has no finite contrast")
    return gamma_m * (2 * lam + 1) / (2 * lam - 1)


# ----------------------------------------------------------------------------
# |D|^alpha and Sobolev normalization
# ----------------------------------------------------------------------------


def fractional_modulation(alpha, energy: EnergyForm, phi):
    """``|D|^alpha phi = (2E)^(-alpha) phi`` through the eigen-factorization of E."""
    if not -2.0 <= alpha <= 2.0:
        raise InvalidValue(f"alpha={alpha} outside [-2, 2]")
    phi = np.asarray(phi, dtype=float)
    if alpha == 0:
        return phi.copy()
    return energy.apply_power(-alpha, phi, scale=2.0)


def sobolev_normalizer(energy: EnergyForm, phi):
    """c = 1 / <E phi, phi>."""
    q = energy.quadratic(np.asarray(phi, dtype=float))
    if not np.isfinite(q) or q <= 0:
        raise ZeroNorm(f"energy norm {q!r} is not positive")
    return 1.0 / q


# ----------------------------------------------------------------------------
# spectral windows
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralWindow:
    h: float
    r: float
    s: float
    m_interval: tuple | None = None  # window on m*h for the second joint coordinate

    def __post_init__(self):
        if self.h <= 0:
            raise InvalidValue("h must be positive")
        if self.r > self.s:
            raise InvalidValue("window needs r <= s")
        if self.m_interval is not None and self.m_interval[0] > self.m_interval[1]:
            raise InvalidValue("m window needs lo <= hi")

    def lambda_bounds(self):
        """The |lambda| interval selected by the window."""
        lo = self.h * np.sqrt(rho_inv(self.r)) if self.r > 0 else 0.0
        hi = self.h * np.sqrt(rho_inv(self.s)) if self.s < 1 else np.inf
        return lo, hi


@dataclass
class WindowSelection:
    pairs: list
    empty: bool


def select_window(pairs, window: SpectralWindow) -> WindowSelection:
    """Pairs with rho(lambda^2 / h^2) in [r, s] (and m h in the m-window)."""
    out = []
    for p in pairs:
        val = rho(p.lambda_tilde**2 / window.h**2)
        if not (window.r <= val <= window.s):
            continue
        if window.m_interval is not None:
            if p.m is None:
                raise InvalidValue("m-window needs eigenpairs from azimuthal blocks")
            mh = p.m * window.h
            if not (window.m_interval[0] <= mh <= window.m_interval[1]):
                continue
        out.append(p)
    out.sort(key=lambda p: p.index)
    return WindowSelection(out, not out)


EIGENTABLE_COLUMNS = ["index", "m", "lambda", "c"]
