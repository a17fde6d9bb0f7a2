"""Extrinsic differential geometry of parametrized closed surfaces in R^3.

Charts use the parameters ``u = (u1, u2)``.  For the polar charts (sphere,
spheroid, surfaces of revolution, generic radial-type parametrizations)
``u1`` is the polar angle in ``[0, pi]`` and ``u2`` the azimuth in
``[0, 2 pi)``.  The torus uses two periodic angles.

Curvature sign convention: the normal points out of the enclosed body and
``A_ij = -<X_ij, nu>``, so convex bodies have positive principal curvatures.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    DegenerateChart,
    InvalidValue,
    PoleSingularity,
    ResolutionTooLow,
    UnsupportedTopology,
)

EPS_REG = 1e-10
MIN_RESOLUTION = 8
TWO_PI = 2.0 * np.pi


# ----------------------------------------------------------------------------
# charts
# ----------------------------------------------------------------------------


class SurfaceChart:
    """A regular parametrization of a closed surface.

    Subclasses implement :meth:`derivatives`, returning the position and its
    first and second partial derivatives on broadcastable parameter arrays.
    """

    kind = "abstract"
    periodic = (False, True)
    domain = ((0.0, np.pi), (0.0, TWO_PI))
    polar = True  # u1 is a polar angle with the poles at 0 and pi
    axisymmetric = False
    orientation = 1.0

    def derivatives(self, u1, u2):  # pragma: no cover - interface
        raise NotImplementedError

    def params(self) -> dict:  # pragma: no cover - interface
        raise NotImplementedError

    def position(self, u1, u2):
        return self.derivatives(u1, u2)["X"]

    def content_hash(self) -> str:
        blob = json.dumps({"kind": self.kind, **self.params()}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # Polar charts extend to smooth maps of the unit sphere, which the
    # singular quadrature in layer_potentials relies on.
    def sphere_map(self, d):
        """Map unit vectors ``d`` (..., 3) to surface points.

        Returns ``(X, J)`` where ``J`` is the surface area element relative to
        the round sphere's, i.e. ``|X_1 x X_2| / sin(u1)``.
        """
        if not self.polar:
            raise UnsupportedTopology(f"{self.kind} chart has no sphere extension")
        d = np.asarray(d, dtype=float)
        th = np.arccos(np.clip(d[..., 2], -1.0, 1.0))
        th = np.clip(th, 1e-9, np.pi - 1e-9)
        ph = np.arctan2(d[..., 1], d[..., 0])
        D = self.derivatives(th, ph)
        cr = np.cross(D["X1"], D["X2"])
        return D["X"], np.linalg.norm(cr, axis=-1) / np.sin(th)

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({inner})"


class RevolutionChart(SurfaceChart):
    """Surface of revolution about the z-axis from a Fourier profile.

    The meridian is ``rho(t) = sum_k b_k sin(k t)``, ``z(t) = sum_k a_k cos(k t)``
    for ``t`` in ``[0, pi]``.  Sine/cosine series make the surface smooth at
    both poles automatically.
    """

    kind = "surface_of_revolution"
    axisymmetric = True

    def __init__(self, rho_sin, z_cos, kind=None, extra=None):
        self.b = np.asarray(rho_sin, dtype=float)
        self.a = np.asarray(z_cos, dtype=float)
        if kind is not None:
            self.kind = kind
        self._extra = dict(extra or {})

    @classmethod
    def from_profile(cls, rho, z):
        """Interpolate uniformly spaced profile samples from pole to pole.

        ``rho[k], z[k]`` sit at ``t_k = pi k / (M - 1)``; the end samples must
        lie on the axis.
        """
        rho = np.asarray(rho, dtype=float)
        z = np.asarray(z, dtype=float)
        M = rho.size
        if M < 5 or z.size != M:
            raise InvalidValue("profile needs at least 5 (rho, z) samples")
        if abs(rho[0]) > 1e-12 or abs(rho[-1]) > 1e-12:
            raise InvalidValue("profile must start and end on the axis (rho = 0)")
        if np.any(rho[1:-1] <= 0):
            raise InvalidValue("profile rho must be positive away from the poles")
        # odd/even reflection gives a closed periodic meridian
        rho_ext = np.concatenate([rho, -rho[-2:0:-1]])
        z_ext = np.concatenate([z, z[-2:0:-1]])
        L = rho_ext.size
        F_r = np.fft.rfft(rho_ext)
        F_z = np.fft.rfft(z_ext)
        b = -2.0 * F_r.imag / L
        a = 2.0 * F_z.real / L
        a[0] /= 2.0
        b[0] = 0.0
        if L % 2 == 0:
            a[-1] /= 2.0
            b[-1] = 0.0
        return cls(b, a, extra={"profile_rho": rho.tolist(), "profile_z": z.tolist()})

    def params(self):
        if self._extra:
            return dict(self._extra)
        return {"rho_sin": self.b.tolist(), "z_cos": self.a.tolist()}

    def profile(self, t, order=2):
        """Return (rho, z) and derivatives up to ``order`` at ``t``."""
        t = np.asarray(t, dtype=float)
        out = []
        k_b = np.arange(self.b.size)
        k_a = np.arange(self.a.size)
        kt_b = np.multiply.outer(t, k_b)
        kt_a = np.multiply.outer(t, k_a)
        sb, cb = np.sin(kt_b), np.cos(kt_b)
        sa, ca = np.sin(kt_a), np.cos(kt_a)
        out.append((sb @ self.b, ca @ self.a))
        if order >= 1:
            out.append((cb @ (k_b * self.b), -(sa @ (k_a * self.a))))
        if order >= 2:
            out.append((-(sb @ (k_b**2 * self.b)), -(ca @ (k_a**2 * self.a))))
        if order >= 3:
            out.append((-(cb @ (k_b**3 * self.b)), sa @ (k_a**3 * self.a)))
        return out

    def derivatives(self, u1, u2):
        u1, u2 = np.broadcast_arrays(np.asarray(u1, float), np.asarray(u2, float))
        (r, z), (r1, z1), (r2, z2) = self.profile(u1, 2)
        c, s = np.cos(u2), np.sin(u2)
        zero = np.zeros_like(r)
        return {
            "X": np.stack([r * c, r * s, z], -1),
            "X1": np.stack([r1 * c, r1 * s, z1], -1),
            "X2": np.stack([-r * s, r * c, zero], -1),
            "X11": np.stack([r2 * c, r2 * s, z2], -1),
            "X12": np.stack([-r1 * s, r1 * c, zero], -1),
            "X22": np.stack([-r * c, -r * s, zero], -1),
        }

    def sphere_map(self, d):
        d = np.asarray(d, dtype=float)
        th = np.arccos(np.clip(d[..., 2], -1.0, 1.0))
        rho_d = np.hypot(d[..., 0], d[..., 1])
        (r, z), (r1, z1) = self.profile(th, 1)[:2]
        # rho(t)/sin(t) has a removable singularity at the poles
        small = rho_d < 1e-7
        safe = np.where(small, 1.0, rho_d)
        ratio = np.where(small, np.abs(r1), r / safe)
        cphi = np.where(small, 1.0, d[..., 0] / safe)
        sphi = np.where(small, 0.0, d[..., 1] / safe)
        X = np.stack([r * cphi, r * sphi, z], -1)
        return X, ratio * np.hypot(r1, z1)

    def meridian_curvatures(self, t):
        """(kappa_azimuthal, kappa_meridional) along the profile, poles included."""
        t = np.asarray(t, dtype=float)
        (r, z), (r1, z1), (r2, z2) = self.profile(t, 2)
        speed = np.hypot(r1, z1)
        k_mer = (z1 * r2 - r1 * z2) / speed**3
        on_axis = np.abs(r) < 1e-12
        safe_r = np.where(on_axis, 1.0, r)
        k_az = np.where(on_axis, k_mer, -z1 / (safe_r * speed))
        return k_az, k_mer


def Sphere(R=1.0):
    if R <= 0:
        raise InvalidValue("sphere radius must be positive")
    return RevolutionChart([0.0, R], [0.0, R], kind="sphere", extra={"R": float(R)})


def Spheroid(a=1.0, c=2.0):
    """Spheroid with equatorial semi-axis ``a`` and polar semi-axis ``c``."""
    if a <= 0 or c <= 0:
        raise InvalidValue("spheroid semi-axes must be positive")
    return RevolutionChart(
        [0.0, a], [0.0, c], kind="spheroid", extra={"a": float(a), "c": float(c)}
    )


class TorusChart(SurfaceChart):
    """Torus with major radius R and minor radius r; both angles periodic."""

    kind = "torus"
    periodic = (True, True)
    domain = ((0.0, TWO_PI), (0.0, TWO_PI))
    polar = False
    orientation = -1.0  # X_u x X_v points inward for this parametrization

    def __init__(self, R_major=2.0, r_minor=0.5):
        if not (R_major > r_minor > 0):
            raise InvalidValue("torus needs R_major > r_minor > 0")
        self.R = float(R_major)
        self.r = float(r_minor)

    def params(self):
        return {"R_major": self.R, "r_minor": self.r}

    def derivatives(self, u1, u2):
        u, v = np.broadcast_arrays(np.asarray(u1, float), np.asarray(u2, float))
        R, r = self.R, self.r
        cu, su, cv, sv = np.cos(u), np.sin(u), np.cos(v), np.sin(v)
        w = R + r * cu
        zero = np.zeros_like(u)
        return {
            "X": np.stack([w * cv, w * sv, r * su], -1),
            "X1": np.stack([-r * su * cv, -r * su * sv, r * cu], -1),
            "X2": np.stack([-w * sv, w * cv, zero], -1),
            "X11": np.stack([-r * cu * cv, -r * cu * sv, -r * su], -1),
            "X12": np.stack([r * su * sv, -r * su * cv, zero], -1),
            "X22": np.stack([-w * cv, -w * sv, zero], -1),
        }


class GenericParametricChart(SurfaceChart):
    """Polar-topology chart given by symbolic component expressions in u, v.

    ``u`` is the polar angle in [0, pi] and ``v`` the azimuth.  Expressions
    are parsed and differentiated with sympy; the orientation is fixed so
    that the signed enclosed volume is positive.
    """

    kind = "generic"

    def __init__(self, expressions):
        import sympy as sp

        if len(expressions) != 3:
            raise InvalidValue("generic chart needs three component expressions")
        self.expressions = [str(e) for e in expressions]
        u, v = sp.symbols("u v", real=True)
        try:
            comps = [sp.sympify(e, locals={"u": u, "v": v}) for e in self.expressions]
        except (sp.SympifyError, SyntaxError, TypeError) as exc:
            raise InvalidValue(f"cannot parse expression: {exc}") from exc
        free = set().union(*(c.free_symbols for c in comps))
        if not free <= {u, v}:
            raise InvalidValue(f"unknown symbols {sorted(map(str, free - {u, v}))}")
        table = {
            "X": comps,
            "X1": [sp.diff(c, u) for c in comps],
            "X2": [sp.diff(c, v) for c in comps],
            "X11": [sp.diff(c, u, 2) for c in comps],
            "X12": [sp.diff(c, u, v) for c in comps],
            "X22": [sp.diff(c, v, 2) for c in comps],
        }
        self._funcs = {k: sp.lambdify((u, v), e, "numpy") for k, e in table.items()}
        self.orientation = 1.0
        if _signed_volume(self, 16, 32) < 0:
            self.orientation = -1.0

    def params(self):
        return {"expressions": list(self.expressions)}

    def derivatives(self, u1, u2):
        u1, u2 = np.broadcast_arrays(np.asarray(u1, float), np.asarray(u2, float))
        out = {}
        for key, f in self._funcs.items():
            comps = [np.broadcast_to(np.asarray(c, float), u1.shape) for c in f(u1, u2)]
            out[key] = np.stack(comps, -1)
        return out


def random_convex_perturbation(seed=0, amplitude=0.08):
    """Radial perturbation of the unit sphere by random low-degree polynomials.

    The radius is ``1 + amplitude * q(x, y, z)`` with ``q`` a random
    combination of monomials of degree <= 3 in the direction cosines,
    rescaled so that ``|q| <= 1``.  Small amplitudes keep the body convex.
    """
    rng = np.random.default_rng(seed)
    monomials = ["x*y", "y*z", "x*z", "x**2 - y**2", "3*z**2 - 1", "x**3", "y*z**2", "x*y*z"]
    coef = rng.uniform(-1.0, 1.0, size=len(monomials))
    coef /= np.sum(np.abs(coef)) * 2.0
    q = " + ".join(f"({c:.12g})*({m})" for c, m in zip(coef, monomials))
    sub = {"x": "(sin(u)*cos(v))", "y": "(sin(u)*sin(v))", "z": "(cos(u))"}
    for k, val in sub.items():
        q = q.replace(k, val)
    radius = f"(1 + {amplitude:.12g}*({q}))"
    return GenericParametricChart(
        [f"{radius}*sin(u)*cos(v)", f"{radius}*sin(u)*sin(v)", f"{radius}*cos(u)"]
    )


# ----------------------------------------------------------------------------
# pointwise geometry
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PointGeometry:
    u: np.ndarray
    x: np.ndarray
    nu: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    A: np.ndarray
    H_mean: float
    kappas: np.ndarray  # ascending
    principal_dirs: np.ndarray  # rows v1, v2 (ambient unit vectors)
    tangent_basis: np.ndarray  # rows: ambient images of the coordinate vectors
    at_pole: bool = False

    @property
    def d(self):
        return 3


@dataclass
class GeometryBatch:
    """Vectorized geometry on an array of parameter points (leading axis N)."""

    u: np.ndarray
    x: np.ndarray
    nu: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    A: np.ndarray
    H_mean: np.ndarray
    kappas: np.ndarray
    principal_dirs: np.ndarray  # (N, 2, 3)
    tangent_basis: np.ndarray  # (N, 2, 3)
    area_element: np.ndarray
    at_pole: np.ndarray

    def point(self, i) -> PointGeometry:
        return PointGeometry(
            u=self.u[i], x=self.x[i], nu=self.nu[i], g=self.g[i], g_inv=self.g_inv[i],
            A=self.A[i], H_mean=float(self.H_mean[i]), kappas=self.kappas[i],
            principal_dirs=self.principal_dirs[i], tangent_basis=self.tangent_basis[i],
            at_pole=bool(self.at_pole[i]),
        )

    def __len__(self):
        return self.x.shape[0]


def _dot(a, b):
    return np.einsum("...k,...k->...", a, b)


def _geometry_from_derivatives(D, orientation):
    X1, X2 = D["X1"], D["X2"]
    cr = np.cross(X1, X2)
    area = np.linalg.norm(cr, axis=-1)
    if np.any(area < EPS_REG):
        raise DegenerateChart(f"|X1 x X2| = {area.min():.3e} below {EPS_REG:g}")
    nu = orientation * cr / area[..., None]
    g11, g12, g22 = _dot(X1, X1), _dot(X1, X2), _dot(X2, X2)
    A11, A12, A22 = -_dot(D["X11"], nu), -_dot(D["X12"], nu), -_dot(D["X22"], nu)
    detg = g11 * g22 - g12**2
    trace = (g11 * A22 + g22 * A11 - 2 * g12 * A12) / detg
    H = 0.5 * trace
    # shape operator g^-1 A; its discriminant avoids the H^2 - K cancellation
    S11 = (g22 * A11 - g12 * A12) / detg
    S22 = (g11 * A22 - g12 * A12) / detg
    S12 = (g22 * A12 - g12 * A22) / detg
    S21 = (g11 * A12 - g12 * A11) / detg
    disc = np.sqrt(np.maximum(0.25 * (S11 - S22) ** 2 + S12 * S21, 0.0))
    k1, k2 = H - disc, H + disc
    g = np.stack([np.stack([g11, g12], -1), np.stack([g12, g22], -1)], -2)
    A = np.stack([np.stack([A11, A12], -1), np.stack([A12, A22], -1)], -2)
    g_inv = np.stack([np.stack([g22, -g12], -1), np.stack([-g12, g11], -1)], -2) / detg[..., None, None]

    # principal direction for k1 in chart coordinates: (A - k1 g) v = 0
    rA = np.stack([A12 - k1 * g12, -(A11 - k1 * g11)], -1)
    rB = np.stack([A22 - k1 * g22, -(A12 - k1 * g12)], -1)
    use_b = np.linalg.norm(rB, axis=-1) > np.linalg.norm(rA, axis=-1)
    c1 = np.where(use_b[..., None], rB, rA)
    umbilic = np.linalg.norm(c1, axis=-1) <= 1e-10 * (1 + np.abs(H)) * (1 + np.sqrt(g11 * g22))
    c1 = np.where(umbilic[..., None], np.stack([np.ones_like(H), np.zeros_like(H)], -1), c1)
    v1 = c1[..., 0:1] * X1 + c1[..., 1:2] * X2
    v1 /= np.linalg.norm(v1, axis=-1, keepdims=True)
    v2 = np.cross(nu, v1)
    dirs = np.stack([v1, v2], -2)
    tb = np.stack([X1, X2], -2)
    return dict(x=D["X"], nu=nu, g=g, g_inv=g_inv, A=A, H_mean=H,
                kappas=np.stack([k1, k2], -1), principal_dirs=dirs,
                tangent_basis=tb, area_element=area)


def _pole_geometry(chart, u1, u2):
    """Limit geometry at a polar point, expressed in a principal tangent frame."""
    if isinstance(chart, RevolutionChart):
        (r, z), (r1, z1), (r2, z2), (r3, z3) = chart.profile(u1, 3)
        if abs(r2) > 1e-8 or abs(z1) > 1e-8 or abs(z3) > 1e-8:
            raise PoleSingularity("profile is not C^2 across the axis")
        k_az, k_mer = chart.meridian_curvatures(u1)
        kap = float(k_mer)
        x = np.array([0.0, 0.0, float(z)])
        nu = np.array([0.0, 0.0, np.sign(r1)])
        k1 = k2 = kap
    else:
        eps = 1e-5
        t = eps if u1 < np.pi / 2 else np.pi - eps
        D = chart.derivatives(np.array([t]), np.array([u2]))
        geo = _geometry_from_derivatives(D, chart.orientation)
        x = chart.position(u1, u2)
        nu = geo["nu"][0]
        k1, k2 = geo["kappas"][0]
    e1 = np.cross([0.0, 1.0, 0.0], nu)
    if np.linalg.norm(e1) < 1e-8:
        e1 = np.cross([1.0, 0.0, 0.0], nu)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(nu, e1)
    H = 0.5 * (k1 + k2)
    return dict(x=np.asarray(x, float), nu=nu, g=np.eye(2), g_inv=np.eye(2),
                A=np.diag([k1, k2]), H_mean=H, kappas=np.array([k1, k2]),
                principal_dirs=np.stack([e1, e2]), tangent_basis=np.stack([e1, e2]),
                area_element=0.0)


def _check_domain(chart, u1, u2):
    (a1, b1), _ = chart.domain
    if not chart.periodic[0] and (np.any(u1 < a1 - 1e-12) or np.any(u1 > b1 + 1e-12)):
        raise InvalidValue(f"u1 outside chart domain [{a1}, {b1}]")


def geometry_batch(chart: SurfaceChart, u) -> GeometryBatch:
    """Geometry at an (N, 2) array of parameter points (poles not allowed)."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    _check_domain(chart, u[:, 0], u[:, 1])
    D = chart.derivatives(u[:, 0], u[:, 1])
    geo = _geometry_from_derivatives(D, chart.orientation)
    return GeometryBatch(u=u, at_pole=np.zeros(len(u), bool), **geo)


def local_geometry(chart: SurfaceChart, u) -> PointGeometry:
    """Position, normal, metric, second fundamental form and curvatures at ``u``."""
    u = np.asarray(u, dtype=float).reshape(2)
    _check_domain(chart, u[:1], u[1:])
    if chart.polar and (np.sin(u[0]) < 1e-12):
        geo = _pole_geometry(chart, u[0], u[1])
        geo.pop("area_element")
        return PointGeometry(u=u, at_pole=True, **geo)
    return geometry_batch(chart, u[None, :]).point(0)


def revolution_frame(geom: PointGeometry):
    """Azimuthal frame of a surface-of-revolution point.

    Returns ``(v1, v2, kappa_along_v1, kappa_along_v2)`` with ``v1`` the unit
    azimuthal direction ((v1)_z = 0) and ``v2 = nu x v1`` so that
    ``(v1 x v2) . nu > 0``.  Normal curvatures are read from the shape
    operator, so the frame also works at umbilic points.
    """
    x = geom.x
    rho = np.hypot(x[0], x[1])
    if rho < 1e-12:
        v1 = geom.principal_dirs[0]
    else:
        v1 = np.array([-x[1], x[0], 0.0]) / rho
    v2 = np.cross(geom.nu, v1)
    return v1, v2, normal_curvature(geom, v1), normal_curvature(geom, v2)


def normal_curvature(geom: PointGeometry, v):
    """Second fundamental form II(v, v) for an ambient unit tangent vector v."""
    tb = geom.tangent_basis  # rows X1, X2 (or frame vectors at poles)
    # coordinates c with c @ tb = v, solved in the metric
    c = geom.g_inv @ (tb @ v)
    return float(c @ geom.A @ c)


# ----------------------------------------------------------------------------
# Assumption (A)
# ----------------------------------------------------------------------------


@dataclass
class AssumptionAReport:
    holds: bool
    worst_margin: float
    violating_nodes: list
    sampled_consistent: bool
    margins: np.ndarray = field(repr=False)


def check_assumption_A(chart, mesh, n_dirs=16, rng=None) -> AssumptionAReport:
    """Check that ``m(x, w) = <A g^-1 w, g^-1 w> - 2H`` never vanishes.

    Over unit covectors the quadratic form ranges exactly over
    ``[kappa1, kappa2]``, so ``m`` ranges over ``[-kappa2, -kappa1]``.  A node
    passes iff both curvatures are nonzero and of one sign; its margin is
    ``min |m|`` (negated at failing nodes).  Sampled directions are kept as a
    consistency check of the exact range.
    """
    if n_dirs < 8:
        raise InvalidValue("n_dirs must be at least 8")
    k = mesh.geom.kappas
    same_sign = k[:, 0] * k[:, 1] > 0
    mags = np.min(np.abs(k), axis=1)
    margins = np.where(same_sign, mags, -mags)
    # sampled cross-check
    ang = np.linspace(0.0, np.pi, n_dirs, endpoint=False)
    if rng is not None:
        ang = ang + rng.uniform(0, np.pi / n_dirs)
    g, ginv, A, H = mesh.geom.g, mesh.geom.g_inv, mesh.geom.A, mesh.geom.H_mean
    # unit covectors w = L c with g^-1 = L L^T and c on the unit circle
    L = np.linalg.cholesky(g)  # g = L L^T, so L^{T}{-1} maps circle to g-unit vectors
    circle = np.stack([np.cos(ang), np.sin(ang)], -1)
    vecs = np.linalg.solve(np.swapaxes(L, -1, -2)[:, None], circle[None, :, :, None])[..., 0]
    quad = np.einsum("nai,nij,naj->na", vecs, A, vecs)
    m = quad - 2 * H[:, None]
    lo, hi = -k[:, 1:2] - 1e-9 * (1 + np.abs(k[:, 1:2])), -k[:, 0:1] + 1e-9 * (1 + np.abs(k[:, 0:1]))
    consistent = bool(np.all((m >= lo) & (m <= hi)))
    bad = np.flatnonzero(~same_sign).tolist()
    return AssumptionAReport(
        holds=not bad, worst_margin=float(margins.min()), violating_nodes=bad,
        sampled_consistent=consistent, margins=margins,
    )


# ----------------------------------------------------------------------------
# quadrature meshes
# ----------------------------------------------------------------------------


@dataclass
class QuadratureMesh:
    chart: SurfaceChart
    resolution: tuple
    u1: np.ndarray  # 1D nodes along u1
    u2: np.ndarray  # 1D nodes along u2
    w1: np.ndarray
    w2: np.ndarray
    geom: GeometryBatch

    @property
    def n(self):
        return len(self.geom)

    @property
    def nodes(self):
        return self.geom.x

    @property
    def normals(self):
        return self.geom.nu

    @cached_property
    def weights(self):
        return np.outer(self.w1, self.w2).ravel() * self.geom.area_element

    @property
    def total_area(self):
        return float(self.weights.sum())

    @property
    def axisymmetric(self):
        return bool(self.chart.axisymmetric)

    @property
    def node_spacing(self):
        """Typical node spacing sqrt(area / N)."""
        return float(np.sqrt(self.total_area / self.n))

    @property
    def diameter(self):
        x = self.nodes
        c = x.mean(0)
        return float(2 * np.max(np.linalg.norm(x - c, axis=1)))

    def signed_volume(self):
        return float(np.sum(_dot(self.nodes, self.normals) * self.weights) / 3.0)

    def key(self):
        return f"{self.chart.kind}-{self.chart.content_hash()}-{self.resolution[0]}x{self.resolution[1]}"


def gauss_legendre(n, a, b):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def trapezoid_periodic(n, a=0.0, b=TWO_PI):
    return a + (b - a) * np.arange(n) / n, np.full(n, (b - a) / n)


def build_quadrature_mesh(chart: SurfaceChart, resolution) -> QuadratureMesh:
    """Tensor-product rule: Gauss-Legendre in polar u1, trapezoid in periodic axes.

    Node index ``i * n2 + j`` corresponds to ``(u1[i], u2[j])``.
    """
    n1, n2 = (int(r) for r in resolution)
    if n1 < MIN_RESOLUTION or n2 < MIN_RESOLUTION:
        raise ResolutionTooLow(f"resolution {n1}x{n2} below minimum {MIN_RESOLUTION} per axis")
    (a1, b1), (a2, b2) = chart.domain
    if chart.periodic[0]:
        u1, w1 = trapezoid_periodic(n1, a1, b1)
    else:
        u1, w1 = gauss_legendre(n1, a1, b1)
    u2, w2 = trapezoid_periodic(n2, a2, b2)
    U1, U2 = np.meshgrid(u1, u2, indexing="ij")
    u = np.stack([U1.ravel(), U2.ravel()], -1)
    geom = geometry_batch(chart, u)
    return QuadratureMesh(chart=chart, resolution=(n1, n2), u1=u1, u2=u2, w1=w1, w2=w2, geom=geom)


def _signed_volume(chart, n1, n2):
    """Signed enclosed volume with the raw X1 x X2 orientation (chart setup)."""
    u1, w1 = gauss_legendre(n1, 0.0, np.pi)
    u2, w2 = trapezoid_periodic(n2)
    U1, U2 = np.meshgrid(u1, u2, indexing="ij")
    D = chart.derivatives(U1, U2)
    cr = np.cross(D["X1"], D["X2"])
    return float(np.sum(_dot(D["X"], cr) * np.outer(w1, w2)) / 3.0)


def prolate_spheroid_area(a, c):
    """Closed-form area of the spheroid with equatorial a and polar c > a."""
    if c <= a:
        raise InvalidValue("prolate formula needs c > a")
    e = np.sqrt(1 - a * a / (c * c))
    return float(2 * np.pi * a * a * (1 + c / (a * e) * np.arcsin(e)))


def geometry_table(mesh: QuadratureMesh):
    """Rows for the geometry CSV (u1,u2,x,y,z,nu_x,nu_y,nu_z,kappa1,kappa2,H)."""
    G = mesh.geom
    return np.column_stack([G.u, G.x, G.nu, G.kappas, G.H_mean])


GEOMETRY_COLUMNS = ["u1", "u2", "x", "y", "z", "nu_x", "nu_y", "nu_z", "kappa1", "kappa2", "H"]
