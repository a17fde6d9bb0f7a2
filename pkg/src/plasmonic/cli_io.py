"""Surface specs, run configuration, pipelines and the command-line entry point.

Surface specs are JSON objects::

    {"kind": "spheroid", "a": 1.0, "c": 2.0, "name": "prolate", "resolution": [32, 64]}

Every command writes its tables (CSV) and reports (JSON) into ``--out``
through write-then-rename, followed by ``manifest.json`` with the config
hash, surface hash, package versions, wall time and the SHA-256 of every
artifact.  Failures print a JSON error record to stderr (and write
``error.json`` when the output directory is usable) and exit with 2 for
configuration errors or 3 for numerical failures.

Options may also come from environment variables named ``PLASMONIC_`` plus
the upper-cased flag (``PLASMONIC_RESOLUTION=64x128``); explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import platform
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .errors import ConfigError, InvalidValue, MissingField, PlasmonicError, UnknownKind

ENV_PREFIX = "PLASMONIC_"
KINDS = ("sphere", "spheroid", "surface_of_revolution", "torus", "generic")
COMMANDS = ("geometry", "spectrum", "flow", "leaf", "weyl", "concentration", "variance", "helmholtz")


# ----------------------------------------------------------------------------
# surface specs
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SurfaceSpec:
    kind: str
    params: dict
    name: str = ""
    resolution: tuple | None = None

    def to_dict(self):
        out = {"kind": self.kind, **self.params}
        if self.name:
            out["name"] = self.name
        if self.resolution is not None:
            out["resolution"] = list(self.resolution)
        return out

    def __eq__(self, other):
        return isinstance(other, SurfaceSpec) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(emit_surface_spec(self))


def _number(obj, key, path, positive=True):
    if key not in obj:
        raise MissingField(key, path)
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not np.isfinite(val):
        raise InvalidValue(f"{path}.{key}: expected a finite number, got {val!r}")
    if positive and val <= 0:
        raise InvalidValue(f"{path}.{key}: must be positive, got {val!r}")
    return float(val)


def _resolution(val, path):
    if isinstance(val, str):
        try:
            val = [int(p) for p in val.lower().split("x")]
        except ValueError as exc:
            raise InvalidValue(f"{path}: resolution must look like NxM") from exc
    if (not isinstance(val, (list, tuple)) or len(val) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in val)):
        raise InvalidValue(f"{path}: resolution must be two integers")
    if min(val) < 8:
        raise InvalidValue(f"{path}: resolution {val[0]}x{val[1]} below 8 per axis")
    return (int(val[0]), int(val[1]))


def _profile(obj, path):
    if "profile" not in obj:
        raise MissingField("profile", path)
    pts = obj["profile"]
    if not isinstance(pts, list) or len(pts) < 5:
        raise InvalidValue(f"{path}.profile: need a list of at least 5 [rho, z] points")
    out = []
    for i, p in enumerate(pts):
        if not isinstance(p, (list, tuple)) or len(p) != 2 or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in p):
            raise InvalidValue(f"{path}.profile[{i}]: expected [rho, z]")
        out.append([float(p[0]), float(p[1])])
    arr = np.array(out)
    steps = np.linalg.norm(np.diff(arr, axis=0), axis=1)
    if np.any(steps <= 0):
        i = int(np.argmin(steps)) + 1
        raise InvalidValue(f"{path}.profile[{i}]: profile must advance strictly along the meridian")
    return out


def _validate(obj, path="surface"):
    if not isinstance(obj, dict):
        raise InvalidValue(f"{path}: expected an object")
    if "kind" not in obj:
        raise MissingField("kind", path)
    kind = obj["kind"]
    if kind not in KINDS:
        raise UnknownKind(f"{path}.kind: unknown surface kind {kind!r} (known: {', '.join(KINDS)})")
    name = obj.get("name", "")
    if not isinstance(name, str):
        raise InvalidValue(f"{path}.name: expected a string")
    res = _resolution(obj["resolution"], f"{path}.resolution") if "resolution" in obj else None
    if kind == "sphere":
        params = {"R": _number(obj, "R", path)}
    elif kind == "spheroid":
        params = {"a": _number(obj, "a", path), "c": _number(obj, "c", path)}
    elif kind == "torus":
        params = {"R_major": _number(obj, "R_major", path), "r_minor": _number(obj, "r_minor", path)}
        if params["r_minor"] >= params["R_major"]:
            raise InvalidValue(f"{path}.r_minor: must be smaller than R_major")
    elif kind == "surface_of_revolution":
        params = {"profile": _profile(obj, path)}
    else:
        if "random_perturbation" in obj:
            rp = obj["random_perturbation"]
            sub = f"{path}.random_perturbation"
            if not isinstance(rp, dict):
                raise InvalidValue(f"{sub}: expected an object")
            seed = rp.get("seed", 0)
            if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
                raise InvalidValue(f"{sub}.seed: expected a nonnegative integer")
            params = {"random_perturbation": {"seed": seed, "amplitude": _number(rp, "amplitude", sub)}}
        else:
            if "expressions" not in obj:
                raise MissingField("expressions", path)
            ex = obj["expressions"]
            if not isinstance(ex, list) or len(ex) != 3 or not all(isinstance(e, str) for e in ex):
                raise InvalidValue(f"{path}.expressions: expected three strings in u, v")
            params = {"expressions": list(ex)}
    known = {"kind", "name", "resolution", *params}
    extra = sorted(set(obj) - known)
    if extra:
        raise InvalidValue(f"{path}.{extra[0]}: unexpected field for kind {kind!r}")
    return SurfaceSpec(kind, params, name, res)


def parse_surface_spec(text) -> SurfaceSpec:
    """Validate a JSON surface document; errors name the offending field path."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidValue(f"surface: not valid JSON ({exc.msg} at line {exc.lineno} column {exc.colno})") from exc
    return _validate(obj)


def emit_surface_spec(spec: SurfaceSpec) -> str:
    return json.dumps(spec.to_dict(), sort_keys=True, indent=2)


def build_chart(spec: SurfaceSpec):
    from .geometry import GenericParametricChart, RevolutionChart, Sphere, Spheroid, TorusChart, random_convex_perturbation

    p = spec.params
    if spec.kind == "sphere":
        return Sphere(p["R"])
    if spec.kind == "spheroid":
        return Spheroid(p["a"], p["c"])
    if spec.kind == "torus":
        return TorusChart(p["R_major"], p["r_minor"])
    if spec.kind == "surface_of_revolution":
        arr = np.array(p["profile"])
        return RevolutionChart.from_profile(arr[:, 0], arr[:, 1])
    if "random_perturbation" in p:
        rp = p["random_perturbation"]
        return random_convex_perturbation(rp["seed"], rp["amplitude"])
    return GenericParametricChart(p["expressions"])


# ----------------------------------------------------------------------------
# run configuration
# ----------------------------------------------------------------------------


def _floats(text, what, n=None):
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        try:
            vals = [float(v) for v in str(text).split(",") if v.strip()]
        except ValueError as exc:
            raise InvalidValue(f"{what}: expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise InvalidValue(f"{what}: schedule is empty")
    if n is not None and len(vals) != n:
        raise InvalidValue(f"{what}: expected {n} numbers, got {len(vals)}")
    if not all(np.isfinite(vals)):
        raise InvalidValue(f"{what}: values must be finite")
    return vals


@dataclass
class RunConfig:
    command: str
    surface: SurfaceSpec
    resolution: tuple = (32, 64)
    h_schedule: list = field(default_factory=lambda: [0.08, 0.04, 0.02])
    window: tuple = (0.2, 0.8)
    alpha: float = -0.5
    p: tuple = (0.0, 0.0)
    q: tuple = (float(np.pi / 2), 0.0)
    omegas: list = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    e2: list = field(default_factory=lambda: [0.0, 0.5])
    state: tuple | None = None
    t_final: float = 10.0
    index: int = 1
    mode: int = 0
    symbol: str = "x3"
    full: bool = False
    seed: int = 0
    out: str = "out"
    cache: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidValue(f"unknown command {self.command!r}")
        r, s = self.window
        if not 0 <= r <= s <= 1:
            raise InvalidValue(f"window: need 0 <= r <= s <= 1, got {r},{s}")
        if not -2 <= self.alpha <= 2:
            raise InvalidValue(f"alpha: {self.alpha} outside [-2, 2]")
        if any(h <= 0 for h in self.h_schedule):
            raise InvalidValue("h-schedule: values must be positive")
        if any(w < 0 for w in self.omegas):
            raise InvalidValue("omega: values must be nonnegative")
        if self.t_final <= 0:
            raise InvalidValue("t-final: must be positive")
        if self.seed < 0:
            raise InvalidValue("seed: must be nonnegative")
        if self.symbol not in SYMBOLS:
            raise InvalidValue(f"symbol: unknown {self.symbol!r} (known: {', '.join(SYMBOLS)})")

    def canonical(self):
        """JSON-able view used for hashing (output and cache locations excluded)."""
        d = asdict(self)
        d["surface"] = self.surface.to_dict()
        d.pop("out")
        d.pop("cache")
        return d

    def config_hash(self):
        return hashlib.sha256(json.dumps(self.canonical(), sort_keys=True).encode()).hexdigest()


# ----------------------------------------------------------------------------
# output
# ----------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    f = float(v)
    if np.isnan(f):
        return "nan"
    return repr(f)


def atomic_write(path, data: bytes | str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def json_text(obj):
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


class Artifacts:
    def __init__(self, out):
        self.out = out
        self.files = {}

    def write(self, name, text):
        data = text.encode()
        atomic_write(os.path.join(self.out, name), data)
        self.files[name] = hashlib.sha256(data).hexdigest()

    def csv(self, name, columns, rows):
        self.write(name, csv_text(columns, rows))

    def json(self, name, obj):
        self.write(name, json_text(obj))


# ----------------------------------------------------------------------------
# pipelines
# ----------------------------------------------------------------------------


def _pole_bump(x):
    top = np.array([0.0, 0.0, x[:, 2].max()])
    d2 = np.sum((x - top) ** 2, axis=1)
    return np.exp(-d2 / 0.5)


SYMBOLS = {
    "one": lambda x: np.ones(len(x)),
    "x3": lambda x: x[:, 2],
    "pole_bump": _pole_bump,
}


def _mesh(cfg):
    from .geometry import build_quadrature_mesh

    return build_quadrature_mesh(build_chart(cfg.surface), cfg.resolution)


def eigensystem(mesh, cfg):
    """Azimuthal blocks on surfaces of revolution, full assembly otherwise."""
    from .layer_potentials import MatrixCache, assemble_axisym_blocks, cached_layers
    from .spectral import axisym_eigendecomposition, np_eigendecomposition

    if mesh.axisymmetric and not cfg.full:
        blocks = assemble_axisym_blocks(mesh, mesh.resolution[1] // 2)
        return axisym_eigendecomposition(blocks, mesh)
    cache = MatrixCache(cfg.cache) if cfg.cache else None
    S, K = cached_layers(mesh, cache)
    return np_eigendecomposition(S, K)


def run_geometry(cfg, art):
    from .geometry import GEOMETRY_COLUMNS, check_assumption_A, geometry_table

    mesh = _mesh(cfg)
    art.csv("geometry.csv", GEOMETRY_COLUMNS, geometry_table(mesh))
    rep = check_assumption_A(mesh.chart, mesh, rng=np.random.default_rng(cfg.seed))
    art.json("geometry.json", {
        "nodes": mesh.n, "total_area": mesh.total_area, "signed_volume": mesh.signed_volume(),
        "assumption_A": {"holds": rep.holds, "worst_margin": rep.worst_margin,
                         "violating_nodes": len(rep.violating_nodes), "sampled_consistent": rep.sampled_consistent},
    })


def run_spectrum(cfg, art):
    from .layer_potentials import SPECTRUM_COLUMNS, multiplicity_hints
    from .spectral import EIGENTABLE_COLUMNS

    mesh = _mesh(cfg)
    es = eigensystem(mesh, cfg)
    lam = es.eigenvalues
    hints = multiplicity_hints(lam)
    art.csv("eigentable.csv", EIGENTABLE_COLUMNS,
            [[p.index, "" if p.m is None else p.m, p.lambda_tilde, p.c] for p in es.pairs])
    art.csv("spectrum.csv", SPECTRUM_COLUMNS, [[i, v, hh] for i, (v, hh) in enumerate(zip(lam, hints))])
    art.json("spectrum.json", {"n_pairs": len(es), "min": float(lam.min()), "max": float(lam.max()),
                               "method": "blocks" if es.blocks else "full", "diagnostics": es.diagnostics})


def run_flow(cfg, art):
    from .geometry import local_geometry
    from .symbol_dynamics import TRAJECTORY_COLUMNS, CotangentState, integrate_flow, leaf_fiber

    chart = build_chart(cfg.surface)
    if cfg.state is not None:
        st = CotangentState(cfg.state[:2], cfg.state[2:])
    else:
        rng = np.random.default_rng(cfg.seed)
        u = np.array([np.pi / 2 * 0.8, 0.0]) if chart.polar else np.array([0.3, 0.0])
        fib = leaf_fiber(local_geometry(chart, u), None, n_samples=64)
        st = CotangentState(u, fib.xi_chart[int(rng.integers(fib.angles.size))])
    tr = integrate_flow(chart, st, cfg.t_final, n_log=201)
    art.csv("trajectory.csv", TRAJECTORY_COLUMNS, tr.rows())
    art.json("flow.json", {"initial": st.vector(), "t_final": cfg.t_final, "drift_H": tr.drift_H,
                           "drift_f2": tr.drift_f2, "nfev": tr.stats["nfev"]})


def run_leaf(cfg, art):
    from .symbol_dynamics import classify_leaf, e2_max, solve_leaf_equation

    chart = build_chart(cfg.surface)
    emax, t_star = e2_max(chart)
    leaves = []
    for e in cfg.e2:
        cls = classify_leaf(chart, e)
        roots = solve_leaf_equation(chart, t_star, e)
        leaves.append({**cls.as_dict(), "roots_at_widest_ring": roots.thetas, "N": roots.N})
    art.json("leaf.json", {"e2_max": emax, "widest_ring_t": t_star, "leaves": leaves})


def run_weyl(cfg, art):
    from .weyl_concentration import WEYL_COLUMNS, weyl_count

    mesh = _mesh(cfg)
    es = eigensystem(mesh, cfg)
    sw = weyl_count(es, cfg.h_schedule, *cfg.window)
    art.csv("weyl.csv", WEYL_COLUMNS, sw.rows())
    art.json("weyl.json", {"slope": sw.slope, "intercept": sw.intercept, "ratios": sw.ratios,
                           "window": cfg.window})


def run_concentration(cfg, art):
    from .spectral import SpectralWindow
    from .weyl_concentration import CONCENTRATION_COLUMNS, concentration_ratio, window_resolved

    mesh = _mesh(cfg)
    es = eigensystem(mesh, cfg)
    reps = []
    for h in cfg.h_schedule:
        win = SpectralWindow(h, *cfg.window)
        rep = concentration_ratio(es, cfg.p, cfg.q, win, cfg.alpha)
        reps.append({**rep.as_dict(), "resolved": window_resolved(mesh, win)})
    art.csv("concentration.csv", CONCENTRATION_COLUMNS,
            [[r["h"], r["measured_ratio"], r["predicted_ratio"], r["n_pairs"]] for r in reps])
    art.json("concentration.json", {"reports": reps})


def run_variance(cfg, art):
    from .weyl_concentration import VARIANCE_COLUMNS, quantum_variance

    mesh = _mesh(cfg)
    es = eigensystem(mesh, cfg)
    reps = quantum_variance(es, SYMBOLS[cfg.symbol], cfg.h_schedule, *cfg.window, alpha=cfg.alpha)
    art.csv("variance.csv", VARIANCE_COLUMNS, [[r.h, r.variance, r.prediction, r.n_pairs] for r in reps])
    art.json("variance.json", {"symbol": cfg.symbol, "variances": [r.variance for r in reps]})


def run_helmholtz(cfg, art):
    from .helmholtz import HELMHOLTZ_COLUMNS, BlockSpace, CompressedSpace, quasistatic_deviation

    mesh = _mesh(cfg)
    space = BlockSpace(mesh, cfg.mode) if mesh.axisymmetric and not cfg.full else CompressedSpace(mesh)
    sw = quasistatic_deviation(space, cfg.index, cfg.omegas)
    art.csv("helmholtz.csv", HELMHOLTZ_COLUMNS, sw.rows())
    art.json("resonance.json", {
        "seed_index": cfg.index, "seed_lambda": sw.solutions[0].seed_lambda,
        "slope_phi": sw.slope_phi, "slope_lambda": sw.slope_lambda,
        "solutions": [{"omega": s.params.omega, "mu0": s.params.mu0, "mu1": s.params.mu1, "m": s.m,
                       "residual": s.residual, "iterations": s.iterations, "deviations": s.deviations}
                      for s in sw.solutions],
    })


PIPELINES = {
    "geometry": run_geometry, "spectrum": run_spectrum, "flow": run_flow, "leaf": run_leaf,
    "weyl": run_weyl, "concentration": run_concentration, "variance": run_variance,
    "helmholtz": run_helmholtz,
}


def _versions():
    import scipy
    import sympy

    return {"plasmonic": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "sympy": sympy.__version__}


def run(cfg: RunConfig):
    """Execute one pipeline and write its artifacts and manifest; returns the artifact hashes."""
    np.random.seed(cfg.seed)
    art = Artifacts(cfg.out)
    t0 = time.perf_counter()
    PIPELINES[cfg.command](cfg, art)
    wall = time.perf_counter() - t0
    manifest = {
        "command": cfg.command,
        "config": cfg.canonical(),
        "config_hash": cfg.config_hash(),
        "surface_hash": build_chart(cfg.surface).content_hash(),
        "seed": cfg.seed,
        "versions": _versions(),
        "wall_time_s": wall,
        "artifacts": dict(sorted(art.files.items())),
    }
    atomic_write(os.path.join(cfg.out, "manifest.json"), json_text(manifest))
    return art.files


# ----------------------------------------------------------------------------
# command line
# ----------------------------------------------------------------------------


def _parser():
    ap = argparse.ArgumentParser(prog="plasmonic", description="NP spectra, symbol flows and concentration experiments.")
    ap.add_argument("--version", action="version", version=f"plasmonic {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--surface", help="surface spec JSON file (or inline JSON)")
        sp.add_argument("--resolution", help="NxM quadrature resolution")
        sp.add_argument("--h-schedule", help="comma-separated h values")
        sp.add_argument("--window", help="r,s window on rho(lambda^2/h^2)")
        sp.add_argument("--alpha", help="modulation exponent")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", help="random seed")
        sp.add_argument("--cache", help="matrix cache directory")
        sp.add_argument("--p", help="chart point u1,u2")
        sp.add_argument("--q", help="chart point u1,u2")
        sp.add_argument("--omega", help="comma-separated frequencies")
        sp.add_argument("--e2", help="comma-separated angular momenta")
        sp.add_argument("--state", help="u1,u2,xi1,xi2 initial state")
        sp.add_argument("--t-final", help="flow time")
        sp.add_argument("--index", help="NP eigenpair index (by |lambda| descending)")
        sp.add_argument("--mode", help="azimuthal order for Helmholtz blocks")
        sp.add_argument("--symbol", help=f"variance observable ({', '.join(SYMBOLS)})")
        sp.add_argument("--full", action="store_true", default=None, help="force full assembly")
    return ap


def _option(args, name):
    val = getattr(args, name.replace("-", "_"))
    if val is None:
        val = os.environ.get(ENV_PREFIX + name.replace("-", "_").upper())
    return val


def _int(text, what):
    try:
        return int(text)
    except (TypeError, ValueError) as exc:
        raise InvalidValue(f"{what}: expected an integer, got {text!r}") from exc


def config_from_args(argv) -> RunConfig:
    args = _parser().parse_args(argv)
    src = _option(args, "surface")
    if src is None:
        raise MissingField("surface", "options")
    if src.lstrip().startswith("{"):
        text = src
    else:
        try:
            with open(src, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InvalidValue(f"surface: cannot read {src!r} ({exc.strerror})") from exc
    spec = parse_surface_spec(text)
    kw = {"command": args.command, "surface": spec}
    res = _option(args, "resolution")
    if res is not None:
        kw["resolution"] = _resolution(res, "options.resolution")
    elif spec.resolution is not None:
        kw["resolution"] = spec.resolution
    conv = {
        "h-schedule": ("h_schedule", lambda v: _floats(v, "h-schedule")),
        "window": ("window", lambda v: tuple(_floats(v, "window", 2))),
        "alpha": ("alpha", lambda v: _floats(v, "alpha", 1)[0]),
        "out": ("out", str),
        "seed": ("seed", lambda v: _int(v, "seed")),
        "cache": ("cache", str),
        "p": ("p", lambda v: tuple(_floats(v, "p", 2))),
        "q": ("q", lambda v: tuple(_floats(v, "q", 2))),
        "omega": ("omegas", lambda v: _floats(v, "omega")),
        "e2": ("e2", lambda v: _floats(v, "e2")),
        "state": ("state", lambda v: tuple(_floats(v, "state", 4))),
        "t-final": ("t_final", lambda v: _floats(v, "t-final", 1)[0]),
        "index": ("index", lambda v: _int(v, "index")),
        "mode": ("mode", lambda v: _int(v, "mode")),
        "symbol": ("symbol", str),
    }
    for flag, (key, fn) in conv.items():
        v = _option(args, flag)
        if v is not None:
            kw[key] = fn(v)
    full = _option(args, "full")
    if full is not None:
        kw["full"] = full is True or str(full).lower() in ("1", "true", "yes")
    return RunConfig(**kw)


def _error_record(exc, exit_code):
    return {"error": getattr(exc, "code", "error"), "type": type(exc).__name__, "message": str(exc),
            "exit_code": exit_code}


def _out_dir(argv):
    """Best-effort output directory for error records when the config did not parse."""
    for i, a in enumerate(argv):
        if a == "--out" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--out="):
            return a.split("=", 1)[1]
    return os.environ.get(ENV_PREFIX + "OUT")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    cfg = None
    try:
        cfg = config_from_args(argv)
        run(cfg)
        return 0
    except SystemExit as exc:  # argparse usage errors
        return 2 if exc.code not in (0, None) else 0
    except PlasmonicError as exc:
        code = 2 if isinstance(exc, ConfigError) else 3
        rec = _error_record(exc, code)
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        rec = _error_record(exc, 3)
    sys.stderr.write(json.dumps(rec, sort_keys=True) + "\n")
    out = cfg.out if cfg is not None else _out_dir(argv)
    if out:
        try:
            atomic_write(os.path.join(out, "error.json"), json_text(rec))
        except OSError:
            pass
    return rec["exit_code"]


def main_exit():
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    main_exit()
