"""Helmholtz layer potentials and quasi-static plasmon resonances.

With ``k_j = omega sqrt(eps_j mu_j)`` (branch with Im k_j >= 0) the
resonance condition is the singularity of

    M = 1/2 (mu0^-1 I + mu1^-1 S1^-1 S0) + mu0^-1 K0* - mu1^-1 K1* S1^-1 S0,

where ``S_j, K_j*`` are the layer operators at wavenumber ``k_j``.  At
omega = 0 this is ``c1 I + c2 K*`` with ``c1 = (mu0^-1 + mu1^-1)/2`` and
``c2 = mu0^-1 - mu1^-1``, singular exactly when ``-c1/c2`` is an NP
eigenvalue, i.e. when ``lambda(mu1^-1, mu0^-1)`` is.

The search runs in a *resonance space*: the compressed resolved subspace of
a general mesh, or a single azimuthal block of a surface of revolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidValue, NoResonanceFound, SingularS, WavenumberTooLarge, ZeroDistance
from .layer_potentials import (
    FOUR_PI,
    OperatorMatrix,
    _assemble_pair,
    assemble_axisym_blocks,
    resolved_basis,
)
from .spectral import eigenvalue_to_contrast, plasmonic_map

GUARD = 2.0  # largest |k| diam(dD) accepted
COND_LIMIT = 1e12


def helmholtz_fundamental(k, r):
    """-exp(i k r) / (4 pi r); the k -> 0 limit is the static kernel."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ZeroDistance("the fundamental solution is singular at r = 0")
    out = -np.exp(1j * k * r) / (FOUR_PI * r)
    return complex(out) if out.ndim == 0 else out


def wavenumber(omega, eps, mu):
    """omega sqrt(eps mu) on the branch with nonnegative imaginary part."""
    k = omega * np.sqrt(complex(eps) * complex(mu))
    if k.imag < 0 or (k.imag == 0 and k.real < 0):
        k = -k
    return k


def _guard(k, diam, guard=GUARD):
    if abs(k) * diam > guard:
        raise WavenumberTooLarge(f"|k| diam = {abs(k) * diam:.3g} exceeds the quasi-static guard {guard}")


def assemble_helmholtz_layers(mesh, k, guard=GUARD):
    """(S^k, K^k*) on the mesh; the smooth k-dependent part needs no correction."""
    _guard(k, mesh.diameter, guard)
    S, K = _assemble_pair(mesh, k)
    meta = {"k": complex(k)}
    return (OperatorMatrix(S, "SingleLayer", mesh, mesh.weights, dict(meta)),
            OperatorMatrix(K, "NeumannPoincare", mesh, mesh.weights, dict(meta)))


def _resonance_matrix(S0, K0, S1, K1, mu0, mu1):
    if mu0 == 0 or mu1 == 0:
        raise InvalidValue("mu0 and mu1 must be nonzero")
    cond = np.linalg.cond(S1)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularS(f"S at k1 is numerically singular (cond {cond:.3g})")
    T = np.linalg.solve(S1, S0)
    n = S0.shape[0]
    return 0.5 * (np.eye(n) / mu0 + T / mu1) + K0 / mu0 - (K1 @ T) / mu1


def resonance_operator(mesh, mu0, mu1, k0, k1, m=1, guard=GUARD) -> OperatorMatrix:
    """The resonance matrix on the full mesh, raised to the power ``m``."""
    if m < 1:
        raise InvalidValue("power m must be at least 1")
    S0, K0 = assemble_helmholtz_layers(mesh, k0, guard)
    S1, K1 = (S0, K0) if k1 == k0 else assemble_helmholtz_layers(mesh, k1, guard)
    M = _resonance_matrix(S0.entries, K0.entries, S1.entries, K1.entries, mu0, mu1)
    return OperatorMatrix(np.linalg.matrix_power(M, m), "Resonance", mesh, mesh.weights,
                          {"mu0": mu0, "mu1": mu1, "k0": k0, "k1": k1, "m": m})


# ----------------------------------------------------------------------------
# resonance spaces
# ----------------------------------------------------------------------------


class ResonanceSpace:
    """Layer operators as functions of the wavenumber on a fixed coordinate space.

    ``gram`` is the L^2(dsigma) Gram matrix of the coordinates; the static
    NP matrix ``K*`` at k = 0 and its eigen-decomposition seed the search.
    """

    def __init__(self, mesh, guard=GUARD):
        self.mesh = mesh
        self.guard = guard
        self._cache = {}
        S, K = self.operators(0.0)
        lam, V = np.linalg.eig(K)
        self.static_lambda = lam.real
        self.static_vectors = V

    def _ops(self, k):
        raise NotImplementedError

    def operators(self, k):
        k = complex(k)
        if k not in self._cache:
            if k != 0:
                _guard(k, self.mesh.diameter, self.guard)
            self._cache[k] = self._ops(k if k != 0 else 0.0)
            if len(self._cache) > 8:
                self._cache.pop(next(iter(self._cache)))
        return self._cache[k]

    def matrix(self, mu0, mu1, k0, k1):
        S0, K0 = self.operators(k0)
        S1, K1 = self.operators(k1)
        return _resonance_matrix(S0, K0, S1, K1, mu0, mu1)

    def norm(self, v):
        return float(np.sqrt(abs(np.vdot(v, self.gram @ v))))

    def eigenspace(self, i, tol=1e-6):
        """Static eigenvectors in the cluster of eigenvalue ``i`` (sorted by |lambda| descending)."""
        order = np.argsort(-np.abs(self.static_lambda), kind="stable")
        lam = self.static_lambda[order[i]]
        cluster = np.flatnonzero(np.abs(self.static_lambda - lam) < tol)
        return float(lam), self.static_vectors[:, cluster]

    def distance_to_span(self, v, V):
        """L^2 distance of the unit-normalized ``v`` to span(V)."""
        v = v / self.norm(v)
        G = V.conj().T @ self.gram @ V
        c = np.linalg.solve(G, V.conj().T @ (self.gram @ v))
        return self.norm(v - V @ c)


class CompressedSpace(ResonanceSpace):
    """Weight-orthonormal resolved subspace of a general sphere-like mesh."""

    def __init__(self, mesh, guard=GUARD):
        self.basis = resolved_basis(mesh)
        self.gram = np.eye(self.basis.n)
        super().__init__(mesh, guard)

    def _ops(self, k):
        S, K = _assemble_pair(self.mesh, k)
        B, w = self.basis.matrix, self.basis.weights
        return B.T @ (w[:, None] * (S @ B)), B.T @ (w[:, None] * (K @ B))

    def nodal(self, v):
        return self.basis.matrix @ v


class BlockSpace(ResonanceSpace):
    """Azimuthal order ``m`` of a surface of revolution (ring profiles)."""

    def __init__(self, mesh, m=0, guard=GUARD):
        self.m = m
        b = self._block(mesh, 0.0, m)
        self.rings = b.rings
        self.gram = np.diag(b.S.weights)
        super().__init__(mesh, guard)

    @staticmethod
    def _block(mesh, k, m):
        blocks = assemble_axisym_blocks(mesh, abs(m), k=k)
        return next(b for b in blocks if b.m == m)

    def _ops(self, k):
        b = self._block(self.mesh, k, self.m)
        return b.S.entries, b.Kstar.entries


# ----------------------------------------------------------------------------
# resonance search
# ----------------------------------------------------------------------------


@dataclass
class QuasiStaticParams:
    omega: float
    mu0: complex = 1.0
    mu1: complex = 1.0
    eps0: float = 1.0
    eps1: float = 1.0

    @property
    def k0(self):
        return wavenumber(self.omega, self.eps0, self.mu0)

    @property
    def k1(self):
        return wavenumber(self.omega, self.eps1, self.mu1)


@dataclass
class ResonanceSolution:
    params: QuasiStaticParams
    m: int
    phi: np.ndarray
    residual: float
    seed_index: int
    seed_lambda: float
    iterations: int
    deviations: dict = field(default_factory=dict)

    @property
    def lambda_mu(self):
        """lambda(mu1^-1, mu0^-1), the NP eigenvalue the contrast corresponds to."""
        return plasmonic_map(1 / complex(self.params.mu1), 1 / complex(self.params.mu0))


def _nearest_zero_eig(M, target_vec=None):
    vals, vecs = np.linalg.eig(M)
    if target_vec is None:
        j = int(np.argmin(np.abs(vals)))
    else:
        # track the branch through overlap with the previous eigenvector among the small ones
        cand = np.argsort(np.abs(vals))[:6]
        ov = [abs(np.vdot(vecs[:, c], target_vec)) for c in cand]
        j = int(cand[int(np.argmax(ov))])
    return vals[j], vecs[:, j]


def _kernel_order(M, rel_tol, cap=4):
    """Smallest m at which the count of tiny singular values of M^m stops growing.

    A singular value counts as tiny below ``rel_tol`` times the largest one;
    ``rel_tol`` sits near the solver residual, so semisimple neighbours of
    the resonance (whose singular values only square) are not mistaken for
    Jordan growth.
    """
    def count(A):
        s = np.linalg.svd(A, compute_uv=False)
        return int(np.sum(s < rel_tol * s[0]))

    P = M.copy()
    prev = count(P)
    for m in range(1, cap):
        P = P @ M
        c = count(P)
        if c <= prev:
            return m
        prev = c
    return cap


def resonance_search(space: ResonanceSpace, omega, seed_index, mu0=1.0, eps=(1.0, 1.0),
                     mu1_start=None, max_iter=40, tol=1e-6):
    """Find mu1 near the static contrast of eigenvalue ``seed_index`` making M singular.

    Damped secant-Newton in ``tau = 1/mu1`` on the eigenvalue of M closest
    to zero (an analytic function of tau along a simple branch); the
    residual reported is the smallest singular value of M.
    """
    lam, V = space.eigenspace(seed_index)
    if mu1_start is None:
        tau = complex(eigenvalue_to_contrast(lam, 1.0 / mu0))
    else:
        tau = 1.0 / complex(mu1_start)

    def evaluate(t, ref=None):
        p = QuasiStaticParams(omega, mu0, 1.0 / t, eps[0], eps[1])
        M = space.matrix(p.mu0, p.mu1, p.k0, p.k1)
        nu, vec = _nearest_zero_eig(M, ref)
        return M, nu, vec

    M, nu, vec = evaluate(tau)
    t_prev, nu_prev = tau * (1 + 1e-6) + 1e-9, None
    it = 0
    for it in range(1, max_iter + 1):
        if abs(nu) < 1e-14:
            break
        if nu_prev is None:
            _, nu_prev, _ = evaluate(t_prev, vec)
        slope = (nu - nu_prev) / (tau - t_prev)
        if slope == 0:
            break
        step = -nu / slope
        damp = 1.0
        while True:
            t_new = tau + damp * step
            M_new, nu_new, vec_new = evaluate(t_new, vec)
            if abs(nu_new) < abs(nu) or damp < 1e-3:
                break
            damp *= 0.5
        t_prev, nu_prev = tau, nu
        tau, M, nu, vec = t_new, M_new, nu_new, vec_new
        if abs(tau - t_prev) < 1e-15 * max(1.0, abs(tau)):
            break
    s = np.linalg.svd(M, compute_uv=True)
    residual = float(s[1][-1])
    if residual > tol:
        raise NoResonanceFound(f"smallest singular value {residual:.3g} above {tol} at omega={omega}")
    phi = s[2][-1].conj()
    phi = phi / space.norm(phi)
    params = QuasiStaticParams(omega, mu0, 1.0 / tau, eps[0], eps[1])
    m = _kernel_order(M, max(1e-10, 1e3 * residual / s[1][0]))
    return ResonanceSolution(params, m, phi, residual, seed_index, lam, it)


# ----------------------------------------------------------------------------
# quasi-static deviation
# ----------------------------------------------------------------------------


@dataclass
class DeviationSweep:
    solutions: list
    omegas: np.ndarray
    dev_phi: np.ndarray
    dev_lambda: np.ndarray
    slope_phi: float
    slope_lambda: float

    def rows(self):
        return [[s.params.omega, complex(s.params.mu1).real, complex(s.params.mu1).imag, s.residual,
                 dp, dl] for s, dp, dl in zip(self.solutions, self.dev_phi, self.dev_lambda)]


HELMHOLTZ_COLUMNS = ["omega", "mu1_re", "mu1_im", "residual", "dev_phi", "dev_lambda"]


def _fit_slope(x, y):
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def quasistatic_deviation(space: ResonanceSpace, seed_index, omegas, mu0=1.0, eps=(1.0, 1.0)):
    """Track the resonance branch over ``omegas`` (continuation from the static solution).

    ``dev_phi`` is the L^2 distance of the normalized resonance density to
    the static eigenspace; ``dev_lambda = |lambda(mu1^-1, mu0^-1) - lambda_i|``.
    """
    omegas = np.asarray(omegas, dtype=float)
    if omegas.size < 1:
        raise InvalidValue("empty omega schedule")
    lam, V = space.eigenspace(seed_index)
    order = np.argsort(omegas)
    sols = [None] * omegas.size
    mu1 = None
    for j in order:
        sol = resonance_search(space, omegas[j], seed_index, mu0, eps, mu1_start=mu1)
        mu1 = sol.params.mu1
        dphi = space.distance_to_span(sol.phi, V)
        dlam = abs(sol.lambda_mu - lam)
        sol.deviations = {"phi": dphi, "lambda": dlam}
        sols[j] = sol
    dev_phi = np.array([s.deviations["phi"] for s in sols])
    dev_lam = np.array([s.deviations["lambda"] for s in sols])
    return DeviationSweep(sols, omegas, dev_phi, dev_lam, _fit_slope(omegas, dev_phi), _fit_slope(omegas, dev_lam))
