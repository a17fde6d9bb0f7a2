"""Curvature volumes, fiber volumes, Weyl counting and eigenfunction concentration.

The fiber of ``H = 1`` over a point is the radial graph ``xi = r(w) w`` with
``r(w) = sum kappa_tilde_i w_i^2`` over the unit sphere of the cotangent
plane.  Two quantities live on it:

* the weighted fiber volume ``V = int r^(1+2a) dA`` with the true area
  element ``dA = r^(d-3) sqrt(4 sum kt_i^2 w_i^2 - 3 r^2) dw``;
* the curvature functional ``G = int |r|^e sqrt(sum kt_i^2 w_i^2) dw`` with
  exponent ``e = d-1+2a`` (``AsPrinted``) or ``e = d-2+2a`` (``Consistent``).

``G <= V <= 2G`` holds for the consistent exponent.  Eigenfunction masses are
computed either on nodal densities or, for azimuthal-block eigenpairs, from
per-ring Fourier moments of the weight function, which avoids building
nodal vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BumpUnresolved,
    EmptyFiber,
    EmptyWindow,
    InvalidValue,
)
from .geometry import PointGeometry, local_geometry
from .spectral import EigenSystem, SpectralWindow, rho_inv, select_window
from .symbol_dynamics import kappa_tilde, leaf_angles, leaf_fiber

AS_PRINTED = "as_printed"
CONSISTENT = "consistent"


# ----------------------------------------------------------------------------
# sphere quadrature for the fiber directions
# ----------------------------------------------------------------------------


def _direction_rule(dim, n):
    """Points and weights on the unit sphere S^(dim-1); dim = d - 1 is 2 or 3."""
    if dim == 2:
        a = 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(a), np.sin(a)], -1), np.full(n, 2 * np.pi / n)
    if dim == 3:
        z, wz = np.polynomial.legendre.leggauss(n)
        a = 2 * np.pi * np.arange(2 * n) / (2 * n)
        s = np.sqrt(1 - z**2)
        pts = np.stack([np.outer(s, np.cos(a)), np.outer(s, np.sin(a)), np.outer(z, np.ones_like(a))], -1)
        w = np.outer(wz, np.full(2 * n, np.pi / n))
        return pts.reshape(-1, 3), w.ravel()
    raise InvalidValue(f"fiber quadrature supports d in (3, 4), got d={dim + 1}")


def _fiber_terms(kt, dirs):
    w2 = dirs**2
    r = w2 @ kt
    s2 = w2 @ (kt**2)
    return r, s2


def _kt_of(obj):
    """kappa-tilde from a PointGeometry, a LeafFiber-free curvature vector, or kappas."""
    if isinstance(obj, PointGeometry):
        return kappa_tilde(obj.kappas)
    return kappa_tilde(np.asarray(obj, dtype=float))


# ----------------------------------------------------------------------------
# curvature functional and fiber volume
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvatureVolumeSpec:
    alpha: float = -0.5
    d: int = 3
    e2: float | None = None
    convention: str = CONSISTENT

    def __post_init__(self):
        if not -2 <= self.alpha <= 2:
            raise InvalidValue(f"alpha={self.alpha} outside [-2, 2]")
        if self.convention not in (AS_PRINTED, CONSISTENT):
            raise InvalidValue(f"unknown exponent convention {self.convention!r}")
        if self.e2 is not None and self.d != 3:
            raise InvalidValue("leaf restriction is only defined for d = 3")

    @property
    def exponent(self):
        base = self.d - 1 if self.convention == AS_PRINTED else self.d - 2
        return base + 2 * self.alpha


def curvature_volume_G(geom, spec: CurvatureVolumeSpec = CurvatureVolumeSpec(), n=512):
    """int |r|^e sqrt(sum kt^2 w^2) over the fiber directions.

    ``geom`` is a PointGeometry or a vector of principal curvatures.  With
    ``spec.e2`` set the measure is counting measure on the leaf-equation
    roots (surface-of-revolution frame).
    """
    if spec.e2 is not None:
        if not isinstance(geom, PointGeometry):
            raise InvalidValue("leaf restriction needs a PointGeometry")
        fib = leaf_fiber(geom, spec.e2)
        w = np.stack([np.cos(fib.angles), np.sin(fib.angles)], -1)
        r, s2 = _fiber_terms(fib.kt, w)
        return float(np.sum(np.abs(r) ** spec.exponent * np.sqrt(s2)))
    kt = _kt_of(geom)
    if kt.size != spec.d - 1:
        raise InvalidValue(f"{kt.size} curvatures do not match d={spec.d}")
    dirs, wts = _direction_rule(kt.size, n if kt.size == 2 else max(n // 8, 16))
    r, s2 = _fiber_terms(kt, dirs)
    return float(np.sum(wts * np.abs(r) ** spec.exponent * np.sqrt(s2)))


def fiber_weighted_volume(fiber, alpha=-0.5, n=512, symbol_scale=1.0):
    """int_F |xi|^(1+2 alpha) dA over the H = 1 fiber.

    ``fiber`` is a LeafFiber (its own samples and weights are used: the
    trapezoid rule on the circle for k=1, counting measure for k=2), a
    PointGeometry, or a vector of principal curvatures of any length d-1.
    ``symbol_scale`` multiplies the Hamiltonian, which rescales the fiber by
    ``symbol_scale^(1/2)``.
    """
    if not -2 <= alpha <= 2:
        raise InvalidValue(f"alpha={alpha} outside [-2, 2]")
    sc = np.sqrt(symbol_scale)
    if hasattr(fiber, "radii"):
        if fiber.radii.size == 0:
            raise EmptyFiber("empty fiber")
        w = np.stack([np.cos(fiber.angles), np.sin(fiber.angles)], -1)
        r, s2 = _fiber_terms(fiber.kt, w)
        r, s2 = sc * r, sc**2 * s2
        if fiber.k == 2:
            return float(np.sum(np.abs(r) ** (1 + 2 * alpha)))
        jac = np.sqrt(np.maximum(4 * s2 - 3 * r**2, 0.0))
        return float(np.sum(fiber.weights * np.abs(r) ** (1 + 2 * alpha) * jac))
    kt = _kt_of(fiber) * sc
    dim = kt.size
    dirs, wts = _direction_rule(dim, n if dim == 2 else max(n // 8, 16))
    r, s2 = _fiber_terms(kt, dirs)
    jac = np.abs(r) ** (dim - 2) * np.sqrt(np.maximum(4 * s2 - 3 * r**2, 0.0))
    return float(np.sum(wts * np.abs(r) ** (1 + 2 * alpha) * jac))


def liouville_fiber_volume(geom, alpha=-0.5, n=512):
    """int r^(2+2 alpha) dw / 2: the Liouville mass of the unit shell slice over a point.

    Reported next to :func:`fiber_weighted_volume` as the local-Weyl
    comparison quantity; for alpha = -1/2 it is the annulus area density.
    """
    kt = _kt_of(geom)
    dirs, wts = _direction_rule(kt.size, n if kt.size == 2 else max(n // 8, 16))
    r, _ = _fiber_terms(kt, dirs)
    return float(0.5 * np.sum(wts * np.abs(r) ** (kt.size + 2 * alpha + 1)))


@dataclass
class SandwichResult:
    G: float
    V: float
    ratio: float
    G_as_printed: float
    ratio_as_printed: float
    holds: bool


def sandwich_check(geom, alpha=-0.5, n=512) -> SandwichResult:
    """G <= V <= 2G with the consistent exponent; the printed exponent is only recorded."""
    d = _kt_of(geom).size + 1
    G = curvature_volume_G(geom, CurvatureVolumeSpec(alpha, d, None, CONSISTENT), n)
    Gp = curvature_volume_G(geom, CurvatureVolumeSpec(alpha, d, None, AS_PRINTED), n)
    V = fiber_weighted_volume(geom, alpha, n)
    ratio = V / G
    return SandwichResult(G, V, ratio, Gp, V / Gp, bool(1 - 1e-12 <= ratio <= 2 + 1e-9))


def predicted_ratio(geom_p, geom_q, alpha=-0.5, e2=None, symbol_scale=1.0, n=512):
    """Fiber-volume quotient V(p) / V(q); with ``e2`` the single-leaf version."""
    if e2 is None:
        vp = fiber_weighted_volume(geom_p, alpha, n, symbol_scale)
        vq = fiber_weighted_volume(geom_q, alpha, n, symbol_scale)
    else:
        vp = fiber_weighted_volume(leaf_fiber(geom_p, e2), alpha, symbol_scale=symbol_scale)
        vq = fiber_weighted_volume(leaf_fiber(geom_q, e2), alpha, symbol_scale=symbol_scale)
    return vp / vq


def leaf_G_closed_form(geom, alpha=0.0):
    """Printed-convention G on the e2 = 0 leaf: two roots, each r^(3+2 alpha) (d = 3)."""
    ang = leaf_angles(geom, 0.0)
    fib = leaf_fiber(geom, 0.0)
    r = fib.kt[0] * np.cos(ang) ** 2 + fib.kt[1] * np.sin(ang) ** 2
    return float(np.sum(np.abs(r) ** (3 + 2 * alpha)))


# ----------------------------------------------------------------------------
# masses of eigenfunctions against weight functions
# ----------------------------------------------------------------------------


class RingMoments:
    """Per-ring cosine moments ``sum_j f_ij w_ij cos(k phi_j)`` of a nodal function."""

    def __init__(self, mesh, f):
        n1, n2 = mesh.resolution
        F = (np.asarray(f, dtype=float) * mesh.weights).reshape(n1, n2)
        phi0 = mesh.u2[0]
        spec = np.fft.fft(F, axis=1)
        # shift so the moments refer to the absolute azimuth
        k = np.arange(n2)
        self._c = (spec * np.exp(-1j * k * phi0)[None]).real
        self.n2 = n2

    def __call__(self, rings, m):
        """Integral of ``f |psi|^2`` for a unit block profile of order ``m`` (per-ring factors)."""
        base = self._c[rings, 0]
        if m == 0:
            return base
        k = (2 * abs(m)) % self.n2
        return base + np.sign(m) * self._c[rings, k]


def _pair_masses(system: EigenSystem, pairs, alpha, weights_fns, psi_norms=False):
    """For each pair: ``int f |D|^alpha phi|^2`` for every nodal weight ``f``, plus ``||.||^2``."""
    mesh = system.mesh
    out = np.zeros((len(pairs), len(weights_fns)))
    norms = np.zeros(len(pairs))
    moments = None
    for i, p in enumerate(pairs):
        if p.phi is not None:
            psi = system.modulated(p, alpha)
            w2 = mesh.weights * psi**2
            norms[i] = w2.sum()
            for j, f in enumerate(weights_fns):
                out[i, j] = np.dot(f, w2)
        else:
            if moments is None:
                moments = [RingMoments(mesh, f) for f in weights_fns]
            v, b = system.modulated_profile(p, alpha)
            v2 = v**2
            W = system.block_energies[p.block].basis.weights
            norms[i] = np.dot(W, v2)
            # reconstruction uses sqrt(2) cos(m phi): |psi|^2 = v^2 (1 +- cos 2 m phi)
            for j, mom in enumerate(moments):
                out[i, j] = np.dot(v2, mom(b.rings, b.m))
    return out, norms


# ----------------------------------------------------------------------------
# bumps
# ----------------------------------------------------------------------------


def bump_weights(mesh, center, delta):
    """exp(-1/(1-(d/delta)^2)) on chordal distance, normalized to unit mass."""
    if delta < 3 * mesh.node_spacing:
        raise BumpUnresolved(f"delta={delta:.4g} below three node spacings ({3 * mesh.node_spacing:.4g})")
    dist = np.linalg.norm(mesh.nodes - np.asarray(center, dtype=float), axis=1)
    s = dist / delta
    chi = np.zeros(mesh.n)
    inside = s < 1
    chi[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    mass = np.dot(chi, mesh.weights)
    if mass <= 0:
        raise BumpUnresolved("bump support contains no quadrature node")
    return chi / mass


def default_delta(mesh, h):
    return max(3 * mesh.node_spacing, h**0.25 * mesh.diameter)


# ----------------------------------------------------------------------------
# resolvability of spectral windows
# ----------------------------------------------------------------------------

# On the unit sphere lambda_n = 1/(2(2n+1)) = p/4 with p = 1/(n + 1/2) the
# symbol at frequency n + 1/2: eigenvalues sit at a quarter of the symbol.
SYMBOL_CONSTANT = 0.25


def points_per_wavelength(mesh, lam):
    """Smallest meridional points-per-wavelength over the rings for eigenvalue ``lam``.

    The frequency of a mode with eigenvalue ``lam`` at a ring is estimated
    as ``SYMBOL_CONSTANT * max kappa_tilde / lam``; the spacing is the
    larger gap to the neighbouring rings.
    """
    n1, n2 = mesh.resolution
    x = mesh.nodes.reshape(n1, n2, 3)[:, 0]
    gaps = np.linalg.norm(np.diff(x, axis=0), axis=1)
    spacing = np.maximum(np.concatenate([gaps[:1], gaps]), np.concatenate([gaps, gaps[-1:]]))
    kt = kappa_tilde(mesh.geom.kappas).reshape(n1, n2, 2)[:, 0].max(1)
    freq = SYMBOL_CONSTANT * kt / abs(lam)
    return float(np.min(2 * np.pi / freq / spacing))


def window_resolved(mesh, window: SpectralWindow, min_ppw=8.0):
    """True when the smallest eigenvalue admitted by the window is resolved at ``min_ppw``."""
    lo, _ = window.lambda_bounds()
    if lo <= 0:
        return False
    return points_per_wavelength(mesh, lo) >= min_ppw


# ----------------------------------------------------------------------------
# concentration
# ----------------------------------------------------------------------------


@dataclass
class ConcentrationReport:
    p: tuple
    q: tuple
    h: float
    delta: float
    alpha: float
    window: tuple
    measured_ratio: float
    predicted_ratio: float
    liouville_ratio: float
    n_pairs: int

    def as_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


CONCENTRATION_COLUMNS = ["h", "measured_ratio", "predicted_ratio", "n_pairs"]


def concentration_ratio(system: EigenSystem, p, q, window: SpectralWindow, alpha=-0.5, delta=None):
    """Windowed, c-weighted eigenfunction masses near p over those near q.

    ``p`` and ``q`` are chart parameters.  The prediction is the fiber-volume
    quotient at the two points.
    """
    sel = select_window(system.pairs, window)
    if sel.empty:
        raise EmptyWindow(f"no eigenvalue in window {window}")
    mesh = system.mesh
    chart = mesh.chart
    delta = default_delta(mesh, window.h) if delta is None else delta
    xp, xq = chart.position(*map(float, p)), chart.position(*map(float, q))
    chi_p = bump_weights(mesh, xp, delta)
    same = np.allclose(p, q)
    chi_q = chi_p if same else bump_weights(mesh, xq, delta)
    masses, _ = _pair_masses(system, sel.pairs, alpha, [chi_p, chi_q])
    c = np.array([pr.c for pr in sel.pairs])
    num, den = float(c @ masses[:, 0]), float(c @ masses[:, 1])
    measured = 1.0 if same else num / den
    gp, gq = local_geometry(chart, p), local_geometry(chart, q)
    pred = predicted_ratio(gp, gq, alpha)
    liou = liouville_fiber_volume(gp, alpha) / liouville_fiber_volume(gq, alpha)
    return ConcentrationReport(tuple(map(float, p)), tuple(map(float, q)), window.h, float(delta), alpha,
                               (window.r, window.s), measured, pred, liou, len(sel.pairs))


# ----------------------------------------------------------------------------
# Weyl counting
# ----------------------------------------------------------------------------


def annulus_area(kt, a, b, n=512):
    """Area of {xi : H(x, xi) in [a, b]} = (1/a - 1/b)/2 * int r(w)^2 dw."""
    if a <= 0:
        return np.inf
    kt = np.asarray(kt, float)
    dirs, wts = _direction_rule(kt.size, n)
    r, _ = _fiber_terms(kt, dirs)
    inv_b = 0.0 if not np.isfinite(b) else 1.0 / b
    return 0.5 * (1.0 / a - inv_b) * float(np.sum(wts * r**2))


def annulus_area_closed(kt, a, b):
    """Same area with int (A c^2 + B s^2)^2 = pi (3A^2 + 2AB + 3B^2)/4 (d = 3)."""
    A, B = kt
    inv_b = 0.0 if not np.isfinite(b) else 1.0 / b
    return 0.5 * (1.0 / a - inv_b) * np.pi * (3 * A * A + 2 * A * B + 3 * B * B) / 4


def phase_space_volume(mesh, r, s):
    """int over the surface of the annulus area for the H-window [rho^-1(r), rho^-1(s)]."""
    a = rho_inv(r) if r > 0 else 0.0
    b = rho_inv(s) if s < 1 else np.inf
    if a <= 0:
        raise InvalidValue("Weyl window needs r > 0")
    kts = kappa_tilde(mesh.geom.kappas)
    inv_b = 0.0 if not np.isfinite(b) else 1.0 / b
    A, B = kts[:, 0], kts[:, 1]
    dens = 0.5 * (1.0 / a - inv_b) * np.pi * (3 * A * A + 2 * A * B + 3 * B * B) / 4
    return float(np.dot(mesh.weights, dens))


@dataclass
class WeylReport:
    h: float
    window: tuple
    count: int
    volume: float  # (2 pi h)^-2 times the phase-space integral
    ratio: float


@dataclass
class WeylSweep:
    reports: list
    slope: float
    intercept: float
    ratios: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def rows(self):
        return [[r.h, r.count, r.volume, r.ratio] for r in self.reports]


WEYL_COLUMNS = ["h", "count", "volume", "ratio"]


def weyl_count(system: EigenSystem, hs, r, s, mesh=None) -> WeylSweep:
    """Eigenvalue counts in rho(lambda^2/h^2) in [r, s] against (2 pi h)^-2 times phase-space volume."""
    mesh = system.mesh if mesh is None else mesh
    lam = np.abs(system.eigenvalues)
    base = phase_space_volume(mesh, r, s)
    reports = []
    for h in hs:
        lo, hi = SpectralWindow(h, r, s).lambda_bounds()
        count = int(np.sum((lam >= lo) & (lam <= hi)))
        vol = base / (2 * np.pi * h) ** 2
        reports.append(WeylReport(float(h), (r, s), count, vol, count / vol if vol > 0 else 0.0))
    counts = np.array([rep.count for rep in reports], float)
    ok = counts > 0
    if ok.sum() >= 2:
        slope, icpt = np.polyfit(np.log(np.asarray(hs, float)[ok]), np.log(counts[ok]), 1)
    else:
        slope, icpt = np.nan, np.nan
    return WeylSweep(reports, float(slope), float(icpt), np.array([rep.ratio for rep in reports]))


def sphere_weyl_count(h, r, s, radius=1.0):
    """Exact count for the sphere: sum of 2n+1 over n with 1/(2(2n+1)) in the window."""
    lo, hi = SpectralWindow(h, r, s).lambda_bounds()
    total = 0
    n = 0
    while True:
        lam = 1.0 / (2 * (2 * n + 1))
        if lam < lo:
            break
        if lam <= hi:
            total += 2 * n + 1
        n += 1
    return total


# ----------------------------------------------------------------------------
# quantum variance
# ----------------------------------------------------------------------------


@dataclass
class VarianceReport:
    h: float
    variance: float
    prediction: float
    n_pairs: int
    diagonals: np.ndarray


def fiber_weight(mesh, alpha=-0.5, n=256):
    """Fiber-volume density over the surface, normalized to unit integral."""
    kts = kappa_tilde(mesh.geom.kappas)
    dirs, wts = _direction_rule(2, n)
    w2 = dirs**2
    r = kts @ w2.T
    s2 = (kts**2) @ w2.T
    V = (np.abs(r) ** (1 + 2 * alpha) * np.sqrt(np.maximum(4 * s2 - 3 * r**2, 0.0))) @ wts
    return V / np.dot(mesh.weights, V)


def quantum_variance(system: EigenSystem, a0, hs, r, s, alpha=-0.5):
    """Window-averaged squared deviation of normalized diagonal matrix elements.

    For each windowed pair the diagonal is ``<a0 psi, psi> / ||psi||^2`` with
    ``psi = |D|^(-1/2) phi``; the prediction is ``int a0 w`` with ``w`` the
    normalized fiber-volume density.  ``a0`` takes an (n, 3) array of points.
    """
    mesh = system.mesh
    f = np.asarray(a0(mesh.nodes), dtype=float)
    w = fiber_weight(mesh, alpha)
    pred = float(np.dot(mesh.weights, f * w))
    out = []
    for h in hs:
        sel = select_window(system.pairs, SpectralWindow(h, r, s))
        if sel.empty:
            raise EmptyWindow(f"no eigenvalue in window at h={h}")
        masses, norms = _pair_masses(system, sel.pairs, -0.5, [f])
        diag = masses[:, 0] / norms
        out.append(VarianceReport(float(h), float(np.mean((diag - pred) ** 2)), pred, len(sel.pairs), diag))
    return out


VARIANCE_COLUMNS = ["h", "variance", "prediction", "n_pairs"]
