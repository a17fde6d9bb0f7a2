"""Principal symbols, Hamiltonian flows on T*(dD) and the rotational leaf structure.

States are ``(u, xi)`` with ``xi`` a covector in chart components.  The
NP principal symbol at a point is

    p(x, xi) = tr_g(A) |xi|^-1 - <A g^-1 xi, g^-1 xi> |xi|^-3,

the Hamiltonian is ``H = p^2`` and the regularized one ``rho(H)``.
For a surface of revolution with azimuth ``u2`` the angular momentum
``f2 = xi_1 x_2 - xi_2 x_1`` of the embedded covector equals ``-xi[1]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from .errors import (
    AssumptionAViolated,
    EmptyFiber,
    FlowBlowup,
    InvalidValue,
    NotAxisymmetric,
    ZeroCovector,
)
from .geometry import PointGeometry, geometry_batch, local_geometry, revolution_frame
from .spectral import rho

FD_STEP = 1e-3
RHO1 = float(-np.expm1(-1.0))  # rho(1)


# ----------------------------------------------------------------------------
# symbols
# ----------------------------------------------------------------------------


def _symbol_parts(g_inv, A, H_mean, xi):
    q = np.einsum("...ij,...j->...i", g_inv, xi)
    n2 = np.einsum("...i,...i->...", xi, q)
    a = np.einsum("...i,...ij,...j->...", q, A, q)
    return q, n2, a


def principal_symbol_np(geom: PointGeometry, xi):
    """tr_g(A)/|xi| - <A g^-1 xi, g^-1 xi>/|xi|^3, homogeneous of degree -1."""
    xi = np.asarray(xi, dtype=float)
    _, n2, a = _symbol_parts(geom.g_inv, geom.A, geom.H_mean, xi)
    if np.any(n2 <= 0):
        raise ZeroCovector("the symbol is undefined at xi = 0")
    return 2 * geom.H_mean / np.sqrt(n2) - a / n2**1.5


def hamiltonian(geom: PointGeometry, xi, regularized=False):
    H = principal_symbol_np(geom, xi) ** 2
    return rho(H) if regularized else H


def _symbol_batch(chart, u, xi):
    G = geometry_batch(chart, u)
    q, n2, a = _symbol_parts(G.g_inv, G.A, G.H_mean, xi)
    p = 2 * G.H_mean / np.sqrt(n2) - a / n2**1.5
    return p, G, q, n2, a


def hamiltonian_at(chart, u, xi, regularized=True):
    """H or rho(H) at chart states; ``u``, ``xi`` of shape (n, 2)."""
    p = _symbol_batch(chart, np.atleast_2d(u), np.atleast_2d(xi))[0]
    return rho(p**2) if regularized else p**2


# ----------------------------------------------------------------------------
# states and embedding
# ----------------------------------------------------------------------------


@dataclass
class CotangentState:
    u: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float).reshape(2)
        self.xi = np.asarray(self.xi, dtype=float).reshape(2)

    def vector(self):
        return np.concatenate([self.u, self.xi])


def embed_state(chart, state: CotangentState):
    """Ambient point and covector (identified with a tangent vector by the metric)."""
    G = geometry_batch(chart, state.u[None])
    q = G.g_inv[0] @ state.xi
    return G.x[0], q @ G.tangent_basis[0]


def chart_covector(geom: PointGeometry, xi_amb):
    """Chart components ``xi_i = <xi_amb, X_i>`` of an ambient tangent covector."""
    return geom.tangent_basis @ np.asarray(xi_amb, dtype=float)


def angular_moment(x, xi_amb):
    """f2 = xi_1 x_2 - xi_2 x_1 on ambient components."""
    x = np.asarray(x, dtype=float)
    xi_amb = np.asarray(xi_amb, dtype=float)
    return xi_amb[..., 0] * x[..., 1] - xi_amb[..., 1] * x[..., 0]


# ----------------------------------------------------------------------------
# Hamiltonian vector fields
# ----------------------------------------------------------------------------


def _require_revolution(chart):
    if not getattr(chart, "axisymmetric", False):
        raise NotAxisymmetric(f"{chart.kind} is not a surface of revolution")


def _dH_dxi(G, xi, q, n2, a, p, regularized):
    T = 2 * G.H_mean
    Aq = np.einsum("...ij,...j->...i", G.A, q)
    gAq = np.einsum("...ij,...j->...i", G.g_inv, Aq)
    dp = (-T[..., None] * q / n2[..., None] ** 1.5 - 2 * gAq / n2[..., None] ** 1.5
          + 3 * a[..., None] * q / n2[..., None] ** 2.5)
    H = p**2
    fac = 2 * p * (np.exp(-H) if regularized else 1.0)
    return fac[..., None] * dp


_STENCIL = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])
_SHIFTS = np.concatenate([np.zeros((1, 2)),
                          np.stack([_OFFSETS, np.zeros(4)], -1),
                          np.stack([np.zeros(4), _OFFSETS], -1)])


def hamiltonian_vector_field(chart, state: CotangentState, which="H", regularized=True, step=FD_STEP):
    """(u_dot, xi_dot) = (d_xi f, -d_u f) for f = rho(H) ('H') or f2 ('f2').

    The xi-derivative is analytic; the u-derivative uses fourth-order
    central differences, evaluated in one batch with the base point.
    """
    if which == "f2":
        _require_revolution(chart)
        return np.array([0.0, -1.0]), np.zeros(2)
    if which != "H":
        raise InvalidValue(f"unknown Hamiltonian {which!r}")
    u, xi = state.u, state.xi
    U = u[None] + step * _SHIFTS
    X = np.repeat(xi[None], U.shape[0], 0)
    p, G, q, n2, a = _symbol_batch(chart, U, X)
    if n2[0] <= 0:
        raise ZeroCovector("xi = 0")
    G0 = SimpleNamespace(H_mean=G.H_mean[:1], A=G.A[:1], g_inv=G.g_inv[:1])
    udot = _dH_dxi(G0, xi[None], q[:1], n2[:1], a[:1], p[:1], regularized)[0]
    Hs = rho(p[1:] ** 2) if regularized else p[1:] ** 2
    xidot = -(Hs.reshape(2, 4) @ _STENCIL) / step
    return udot, xidot


def f2_chart(chart, state: CotangentState):
    _require_revolution(chart)
    return -float(state.xi[1])


def poisson_bracket(chart, state: CotangentState, f, g, step=1e-5):
    """{f, g} = d_xi f . d_u g - d_u f . d_xi g by central differences.

    ``f`` and ``g`` take ``(u, xi)`` arrays and return scalars.
    """
    z = state.vector()

    def grad(fun):
        out = np.zeros(4)
        for k in range(4):
            e = np.zeros(4)
            e[k] = step
            out[k] = (fun((z + e)[:2], (z + e)[2:]) - fun((z - e)[:2], (z - e)[2:])) / (2 * step)
        return out

    df, dg = grad(f), grad(g)
    return float(df[2:] @ dg[:2] - df[:2] @ dg[2:])


def moment_map_jacobian(chart, state: CotangentState, step=1e-5):
    """2x4 Jacobian of (rho(H), f2) with respect to (u, xi)."""
    _require_revolution(chart)
    z = state.vector()
    J = np.zeros((2, 4))
    for k in range(4):
        e = np.zeros(4)
        e[k] = step
        hp = hamiltonian_at(chart, (z + e)[None, :2], (z + e)[None, 2:])[0]
        hm = hamiltonian_at(chart, (z - e)[None, :2], (z - e)[None, 2:])[0]
        J[0, k] = (hp - hm) / (2 * step)
    J[1, 3] = -1.0
    return J


def moment_map_rank(chart, state: CotangentState, rtol=1e-6):
    s = np.linalg.svd(moment_map_jacobian(chart, state), compute_uv=False)
    return int(np.sum(s > rtol * s[0]))


# ----------------------------------------------------------------------------
# flows
# ----------------------------------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n, 4): u1, u2, xi1, xi2
    H: np.ndarray  # regularized Hamiltonian along the way
    f2: np.ndarray | None
    stats: dict = field(default_factory=dict)

    @property
    def drift_H(self):
        return float(np.max(np.abs(self.H - self.H[0])) / abs(self.H[0]))

    @property
    def drift_f2(self):
        if self.f2 is None:
            return float("nan")
        return float(np.max(np.abs(self.f2 - self.f2[0])) / max(abs(self.f2[0]), 1e-300))

    def rows(self):
        f2 = self.f2 if self.f2 is not None else np.full(self.times.size, np.nan)
        return np.column_stack([self.times, self.states, self.H, f2])


TRAJECTORY_COLUMNS = ["t", "u1", "u2", "xi1", "xi2", "H", "f2"]


def _rhs_factory(chart, which, regularized):
    def rhs(t, z):
        st = CotangentState(z[:2], z[2:])
        ud, xd = hamiltonian_vector_field(chart, st, which, regularized)
        return np.concatenate([ud, xd])

    return rhs


def _guard_events(chart):
    def blowup(t, z):
        G = geometry_batch(chart, z[None, :2])
        n = np.sqrt(z[2:] @ G.g_inv[0] @ z[2:])
        return min(n - 1e-8, 1e8 - n)

    blowup.terminal = True

    def vanishing(t, z):
        return hamiltonian_at(chart, z[None, :2], z[None, 2:], regularized=False)[0] - 1e-14

    vanishing.terminal = True
    return [blowup, vanishing]


def integrate_flow(chart, state: CotangentState, t_final, which="H", n_log=201,
                   rtol=1e-12, atol=1e-12, regularized=True, events=None, t_eval=None):
    """Integrate the flow of rho(H) (or f2) with an adaptive order-8 Runge-Kutta scheme."""
    xi_norm = np.sqrt(state.xi @ geometry_batch(chart, state.u[None]).g_inv[0] @ state.xi)
    if xi_norm <= 0:
        raise ZeroCovector("flow needs xi != 0")
    guards = _guard_events(chart)
    evs = guards + list(events or [])
    if t_eval is None:
        t_eval = np.linspace(0.0, t_final, n_log)
    sol = solve_ivp(_rhs_factory(chart, which, regularized), (0.0, t_final), state.vector(),
                    method="DOP853", rtol=rtol, atol=atol, t_eval=t_eval, events=evs,
                    dense_output=True)
    if sol.t_events[0].size:
        raise FlowBlowup(f"|xi| left [1e-8, 1e8] at t={sol.t_events[0][0]:.6g}")
    if sol.t_events[1].size:
        raise AssumptionAViolated(f"H vanished at t={sol.t_events[1][0]:.6g}")
    if sol.status < 0:
        raise FlowBlowup(sol.message)
    Z = sol.y.T
    Hs = hamiltonian_at(chart, Z[:, :2], Z[:, 2:], regularized)
    f2 = -Z[:, 3] if getattr(chart, "axisymmetric", False) else None
    stats = {"nfev": int(sol.nfev), "status": int(sol.status), "sol": sol,
             "t_events": [np.asarray(t) for t in sol.t_events[len(guards):]],
             "y_events": [np.asarray(y) for y in sol.y_events[len(guards):]]}
    return Trajectory(sol.t, Z, Hs, f2, stats)


def joint_flow(chart, state: CotangentState, times, **kw):
    """Joint flow at multi-time (t1, t2): rho(H) for t1, then f2 for t2."""
    t1 = times[0]
    z = state
    if t1:
        tr = integrate_flow(chart, z, t1, "H", n_log=2, **kw)
        z = CotangentState(tr.states[-1, :2], tr.states[-1, 2:])
    if len(times) > 1 and times[1]:
        _require_revolution(chart)
        # the f2 flow is the rigid rotation u2 -> u2 - t with xi fixed
        z = CotangentState([z.u[0], z.u[1] - times[1]], z.xi)
    return z


# ----------------------------------------------------------------------------
# leaf fibers
# ----------------------------------------------------------------------------


def kappa_tilde(kappas):
    """(sum kappa) - kappa_i, componentwise."""
    k = np.asarray(kappas, dtype=float)
    return k.sum(-1, keepdims=True) - k


@dataclass
class LeafFiber:
    geom: PointGeometry
    e2: float | None
    angles: np.ndarray  # omega_j = (cos a, sin a) in the frame (v1, v2)
    radii: np.ndarray  # r_j
    weights: np.ndarray  # quadrature weights on the circle (counting weights for k=2)
    frame: np.ndarray  # rows v1, v2
    kt: np.ndarray  # kappa-tilde along v1, v2
    xi_chart: np.ndarray  # (n, 2) chart covectors of the samples

    @property
    def k(self):
        return 1 if self.e2 is None else 2

    def ambient(self):
        w = np.stack([np.cos(self.angles), np.sin(self.angles)], -1)
        return (self.radii[:, None] * w) @ self.frame


def _frame_and_kt(geom, rotational):
    if rotational:
        v1, v2, k1, k2 = revolution_frame(geom)
        return np.stack([v1, v2]), np.array([k2, k1])
    return geom.principal_dirs.copy(), kappa_tilde(geom.kappas)


def fiber_radius(kt, angles):
    return kt[0] * np.cos(angles) ** 2 + kt[1] * np.sin(angles) ** 2


def leaf_fiber(geom: PointGeometry, e2=None, n_samples=256, chart=None) -> LeafFiber:
    """Samples of F_(1,e)(x): xi = r(w) w with r(w) = sum kappa_tilde_i w_i^2.

    k = 1 (``e2`` None): the whole circle, trapezoid weights.  k = 2: the
    angles solving the leaf equation at this point, counting weights.
    """
    k = geom.kappas
    if not k[0] * k[1] > 0:
        raise AssumptionAViolated("leaf fibers need same-sign principal curvatures")
    if e2 is None:
        frame, kt = _frame_and_kt(geom, False)
        ang = 2 * np.pi * np.arange(n_samples) / n_samples
        wts = np.full(n_samples, 2 * np.pi / n_samples)
    else:
        frame, kt = _frame_and_kt(geom, True)
        ang = leaf_angles(geom, e2)
        if ang.size == 0:
            raise EmptyFiber(f"no fiber point with f2 = {e2}")
        wts = np.ones(ang.size)
    r = fiber_radius(kt, ang)
    w = np.stack([np.cos(ang), np.sin(ang)], -1)
    amb = (r[:, None] * w) @ frame
    xi = amb @ geom.tangent_basis.T
    return LeafFiber(geom, e2, ang, r, wts, frame, kt, xi)


# ----------------------------------------------------------------------------
# leaf equation on surfaces of revolution
# ----------------------------------------------------------------------------


@dataclass
class LeafRoots:
    thetas: np.ndarray
    N: int
    coefficients: np.ndarray  # ascending polynomial coefficients in tan(theta/2)
    residuals: np.ndarray


def _leaf_data(geom):
    v1, v2, k1, k2 = revolution_frame(geom)
    x = geom.x
    a1 = v1[0] * x[1] - v1[1] * x[0]
    a2 = v2[0] * x[1] - v2[1] * x[0]
    return a1, a2, k2, k1  # kappa-tilde along v1 is the v2 curvature and vice versa


def _leaf_residual(theta, a1, a2, K1, K2, e2):
    c, s = np.cos(theta), np.sin(theta)
    return (K1 * c * c + K2 * s * s) * (a1 * c + a2 * s) - e2


def leaf_angles(geom, e2, tol=1e-9):
    return _solve_leaf(geom, e2, tol).thetas


def _solve_leaf(geom, e2, tol=1e-9):
    a1, a2, K1, K2 = _leaf_data(geom)
    P = np.polynomial.polynomial
    if abs(a1) < 1e-14 and abs(a2) < 1e-14:
        # on the axis: f2 vanishes identically on the fiber
        if abs(e2) <= tol:
            th = 2 * np.pi * np.arange(64) / 64
            return LeafRoots(th, -1, np.zeros(1), np.zeros(th.size))
        return LeafRoots(np.array([]), 0, np.zeros(1), np.array([]))
    p1 = np.array([K1, 0.0, 4 * K2 - 2 * K1, 0.0, K1])
    p2 = np.array([a1, 2 * a2, -a1])
    p3 = np.array([1.0, 0.0, 3.0, 0.0, 3.0, 0.0, 1.0])
    coef = P.polysub(P.polymul(p1, p2), e2 * p3)
    scale = np.max(np.abs(coef))
    c = coef.copy()
    while c.size > 1 and abs(c[-1]) <= 1e-13 * scale:
        c = c[:-1]
    cands = []
    if c.size > 1:
        roots = P.polyroots(c)
        for t in roots:
            if abs(t.imag) <= 1e-5 * (1 + abs(t)):
                cands.append(2 * np.arctan(t.real))
    cands.append(np.pi)
    f = lambda th: _leaf_residual(th, a1, a2, K1, K2, e2)

    def fp(th):
        c_, s_ = np.cos(th), np.sin(th)
        r = K1 * c_ * c_ + K2 * s_ * s_
        dr = 2 * (K2 - K1) * s_ * c_
        return dr * (a1 * c_ + a2 * s_) + r * (-a1 * s_ + a2 * c_)

    polished = []
    for th in cands:
        for _ in range(30):
            d = fp(th)
            if abs(d) < 1e-14:
                break
            step = f(th) / d
            th -= step
            if abs(step) < 1e-15:
                break
        if abs(f(th)) < tol:
            polished.append(np.mod(th, 2 * np.pi))
    polished.sort()
    out = []
    for th in polished:
        if not out or min(abs(th - out[-1]), 2 * np.pi - abs(th - out[-1])) > 1e-6:
            out.append(th)
    if len(out) > 1 and 2 * np.pi - (out[-1] - out[0]) <= 1e-6:
        out.pop()
    th = np.array(out)
    return LeafRoots(th, len(out), coef, f(th) if th.size else np.array([]))


def solve_leaf_equation(chart, t, e2, tol=1e-9) -> LeafRoots:
    """Fiber angles at the ring of polar parameter ``t`` where f2 = e2.

    The equation ``r(theta)(a1 cos theta + a2 sin theta) = e2`` becomes a
    degree-6 polynomial in ``tan(theta/2)`` whose roots come from the
    companion matrix; theta = pi is checked directly.  Points on the axis
    return ``N = -1`` (every angle) when ``e2 = 0``.
    """
    _require_revolution(chart)
    geom = local_geometry(chart, [t, 0.0])
    return _solve_leaf(geom, e2, tol)


def _max_abs_rcos(K1, K2):
    """max over theta of |(K1 cos^2 + K2 sin^2) cos theta|."""
    best = abs(K1)
    if K2 != K1:
        c2 = K2 / (3 * (K2 - K1))
        if 0 < c2 < 1:
            c = np.sqrt(c2)
            best = max(best, abs((K1 - K2) * c**3 + K2 * c))
    return best


def e2_profile(chart, t):
    """max |f2| over the H = 1 fiber of the ring at polar parameter t."""
    _require_revolution(chart)
    (r, z), = chart.profile(np.atleast_1d(t), 0)
    k_az, k_mer = chart.meridian_curvatures(np.atleast_1d(t))
    # along v1 (azimuthal) the fiber radius uses the meridional curvature
    vals = np.array([abs(ri) * _max_abs_rcos(km, ka) for ri, ka, km in zip(r, k_az, k_mer)])
    return vals


def e2_max(chart, n_grid=721):
    """|e2|_max over the H = 1 bundle and the profile parameter where it is attained."""
    ts = np.linspace(0.0, np.pi, n_grid)
    vals = e2_profile(chart, ts)
    i = int(np.argmax(vals))
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, n_grid - 1)]
    res = minimize_scalar(lambda t: -e2_profile(chart, t)[0], bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    if -res.fun >= vals[i]:
        return float(-res.fun), float(res.x)
    return float(vals[i]), float(ts[i])


# ----------------------------------------------------------------------------
# leaf classification
# ----------------------------------------------------------------------------


@dataclass
class LeafClass:
    tag: str  # Empty | Circle | TorusPeriodic | TorusQuasiPeriodic
    e2: float
    e2_max: float
    theta_per: float | None = None
    rotation: float | None = None  # theta_per / 2 pi
    convergent: tuple | None = None  # (p, q) when periodic

    def as_dict(self):
        return {"tag": self.tag, "e2": self.e2, "e2_max": self.e2_max, "theta_per": self.theta_per,
                "rotation": self.rotation,
                "convergent": list(self.convergent) if self.convergent else None}


def rational_test(x, depth=12, tol=1e-9):
    """Continued-fraction rationality test; returns the fraction or None."""
    a = []
    y = float(x)
    for _ in range(depth):
        n = round(y)
        if abs(y - n) < tol:
            a.append(int(n))
            frac = Fraction(a[-1])
            for ai in reversed(a[:-1]):
                frac = ai + 1 / frac
            return frac
        fl = int(np.floor(y))
        a.append(fl)
        y = 1.0 / (y - fl)
    return None


def start_state_on_leaf(chart, e2, t=None):
    """A chart state on the H = 1 leaf with f2 = e2, at the ring where |e2| has most room."""
    emax, t_star = e2_max(chart)
    t = t_star if t is None else t
    geom = local_geometry(chart, [t, 0.0])
    fib = leaf_fiber(geom, e2)
    return CotangentState([t, 0.0], fib.xi_chart[0]), emax


def _turning_event(chart):
    def ev(t, z):
        st = CotangentState(z[:2], z[2:])
        return hamiltonian_vector_field(chart, st, "H")[0][0]

    return ev


def classify_leaf(chart, e2, depth=12, tol=1e-9, t_budget=200.0) -> LeafClass:
    """Empty, Circle or torus leaf, with the azimuthal advance between turning points."""
    _require_revolution(chart)
    emax, t_star = e2_max(chart)
    scale = max(1.0, emax)
    if abs(e2) > emax + tol * scale:
        return LeafClass("Empty", float(e2), emax)
    if abs(abs(e2) - emax) <= tol * scale:
        return LeafClass("Circle", float(e2), emax)
    if abs(e2) <= tol:
        # meridian orbits through the poles: half a revolution between the poles
        return LeafClass("TorusPeriodic", float(e2), emax, np.pi, 0.5, (1, 2))
    state, _ = start_state_on_leaf(chart, e2, t_star)
    traj = integrate_flow(chart, state, t_budget, "H", n_log=2, events=[_turning_event(chart)])
    ts = traj.stats["t_events"][0]
    ys = traj.stats["y_events"][0]
    if ts.size < 3:
        raise FlowBlowup("fewer than three turning points within the time budget")
    # consecutive turning points alternate between max and min polar angle
    theta_per = float(abs(ys[2, 1] - ys[1, 1]))
    x = theta_per / (2 * np.pi)
    frac = rational_test(x, depth, tol)
    if frac is not None:
        return LeafClass("TorusPeriodic", float(e2), emax, theta_per, x, (frac.numerator, frac.denominator))
    return LeafClass("TorusQuasiPeriodic", float(e2), emax, theta_per, x)


# ----------------------------------------------------------------------------
# Birkhoff averages
# ----------------------------------------------------------------------------


def _bump_weight(s):
    s = np.clip(s, 0.0, 1.0)
    out = np.zeros_like(s)
    inside = (s > 0) & (s < 1)
    out[inside] = np.exp(-1.0 / (s[inside] * (1 - s[inside])))
    return out


_BUMP_MASS = float(np.sum(_bump_weight(np.linspace(0, 1, 200001)[1:-1])) / 200000)


@dataclass
class BirkhoffResult:
    checkpoints: np.ndarray
    plain: np.ndarray  # (1/T) int_0^T a0
    weighted: np.ndarray  # smooth-window weighted averages
    estimate: float  # weighted average at the largest checkpoint


def birkhoff_average(chart, a0, state: CotangentState, T, n_checkpoints=6, n_rot=64, rtol=1e-12):
    """Running time averages of ``a0(x, xi_amb)`` along the flow.

    ``T`` is a float (rho(H) flow only) or a pair ``(T1, T2)`` for the joint
    flow; the f2 direction is a rigid rotation and is averaged with an
    ``n_rot``-point rule in the rotation angle.  Checkpoints are
    ``T1 / 2^j``.  Besides the plain averages the smooth-window weighted
    averages are returned; they converge much faster on periodic and
    quasi-periodic orbits.
    """
    T1, T2 = (float(T), 0.0) if np.ndim(T) == 0 else (float(T[0]), float(T[1]))
    checkpoints = T1 / 2.0 ** np.arange(n_checkpoints - 1, -1, -1)
    rot = np.linspace(0.0, T2, n_rot) if T2 else np.zeros(1)

    def sample(z):
        u = z[:2]
        vals = []
        for a in rot:
            uu = np.array([u[0], u[1] - a])
            G = geometry_batch(chart, uu[None])
            q = G.g_inv[0] @ z[2:]
            vals.append(a0(G.x[0], q @ G.tangent_basis[0]))
        vals = np.array(vals, float)
        if T2:
            return float(np.trapezoid(vals, rot) / T2)
        return float(vals[0])

    base = _rhs_factory(chart, "H", True)
    nck = checkpoints.size

    def rhs(t, y):
        z = y[:4]
        dz = base(t, z)
        v = sample(z)
        out = np.empty(4 + 2 * nck)
        out[:4] = dz
        out[4:4 + nck] = v * (t <= checkpoints)
        out[4 + nck:] = v * _bump_weight(t / checkpoints) / (_BUMP_MASS * checkpoints)
        return out

    y0 = np.concatenate([state.vector(), np.zeros(2 * nck)])
    sol = solve_ivp(rhs, (0.0, T1), y0, method="DOP853", rtol=rtol, atol=1e-13, t_eval=[T1])
    if sol.status < 0:
        raise FlowBlowup(sol.message)
    yT = sol.y[:, -1]
    plain = yT[4:4 + nck] / checkpoints
    weighted = yT[4 + nck:]
    return BirkhoffResult(checkpoints, plain, weighted, float(weighted[-1]))


def orbit_line_average(chart, a0, state: CotangentState, period, n=4096):
    """Average of ``a0`` over one period of a closed orbit, by trapezoid sampling."""
    ts = np.linspace(0.0, period, n + 1)
    tr = integrate_flow(chart, state, period, "H", t_eval=ts)
    vals = []
    for z in tr.states[:-1]:
        G = geometry_batch(chart, z[None, :2])
        q = G.g_inv[0] @ z[2:]
        vals.append(a0(G.x[0], q @ G.tangent_basis[0]))
    return float(np.mean(vals))


def leaf_average(chart, a0, state: CotangentState, n_time=512, n_rot=128, t_budget=200.0):
    """Liouville average of a position observable over the leaf through ``state``.

    On a torus leaf of a surface of revolution the invariant measure is
    ``dt1 dt2`` on a period cell: one polar period of the rho(H) flow times a
    full rotation.  The polar period is located from turning points.
    """
    _require_revolution(chart)
    tr = integrate_flow(chart, state, t_budget, "H", n_log=2, events=[_turning_event(chart)])
    ts = tr.stats["t_events"][0]
    if ts.size < 3:
        raise FlowBlowup("fewer than three turning points within the time budget")
    t0, period = ts[0], ts[2] - ts[0]
    grid = t0 + period * np.arange(n_time) / n_time
    sol = tr.stats["sol"]
    rot = 2 * np.pi * np.arange(n_rot) / n_rot
    total = 0.0
    for t in grid:
        z = sol.sol(t)
        uu = np.stack([np.full(n_rot, z[0]), z[1] - rot], -1)
        G = geometry_batch(chart, uu)
        q = np.einsum("nij,j->ni", G.g_inv, z[2:])
        amb = np.einsum("ni,nik->nk", q, G.tangent_basis)
        total += np.mean([a0(G.x[j], amb[j]) for j in range(n_rot)])
    return float(total / n_time)
