import hashlib
import json
import os
import subprocess
import sys

import pytest

from plasmonic.cli_io import (
    RunConfig,
    atomic_write,
    build_chart,
    config_from_args,
    csv_text,
    emit_surface_spec,
    main,
    parse_surface_spec,
)
from plasmonic.errors import InvalidValue, MissingField, UnknownKind
from plasmonic.geometry import GEOMETRY_COLUMNS

SPECS = [
    {"kind": "sphere", "R": 1.5},
    {"kind": "spheroid", "a": 1.0, "c": 2.0, "name": "prolate", "resolution": [24, 48]},
    {"kind": "torus", "R_major": 2.0, "r_minor": 0.5},
    {"kind": "surface_of_revolution",
     "profile": [[0, 1], [0.7, 0.7], [1, 0], [0.7, -0.7], [0, -1]]},
    {"kind": "generic", "expressions": ["sin(u)*cos(v)", "sin(u)*sin(v)", "1.2*cos(u)"]},
    {"kind": "generic", "random_perturbation": {"seed": 4, "amplitude": 0.05}},
]


@pytest.mark.parametrize("doc", SPECS)
def test_roundtrip_and_build(doc):
    spec = parse_surface_spec(json.dumps(doc))
    assert parse_surface_spec(emit_surface_spec(spec)) == spec
    chart = build_chart(spec)
    assert chart.position(1.0, 0.5).shape == (3,)


@pytest.mark.parametrize("doc,exc,where", [
    ({"kind": "cube"}, UnknownKind, "surface.kind"),
    ({"kind": "spheroid", "a": 1.0}, MissingField, "surface.c"),
    ({"R": 1.0}, MissingField, "surface.kind"),
    ({"kind": "sphere", "R": -1}, InvalidValue, "surface.R"),
    ({"kind": "sphere", "R": 1, "colour": "red"}, InvalidValue, "surface.colour"),
    ({"kind": "torus", "R_major": 1, "r_minor": 2}, InvalidValue, "surface.r_minor"),
    ({"kind": "sphere", "R": 1, "resolution": [4, 64]}, InvalidValue, "surface.resolution"),
    ({"kind": "surface_of_revolution", "profile": [[0, 1], [1, 0], [1, 0], [0.5, -0.5], [0, -1]]},
     InvalidValue, "surface.profile[2]"),
    ({"kind": "generic", "expressions": ["u", "v"]}, InvalidValue, "surface.expressions"),
    ({"kind": "generic", "random_perturbation": {"seed": 1}}, MissingField, "surface.random_perturbation.amplitude"),
])
def test_errors_name_the_field(doc, exc, where):
    with pytest.raises(exc) as info:
        parse_surface_spec(json.dumps(doc))
    assert where in str(info.value)


def test_invalid_json():
    with pytest.raises(InvalidValue, match="not valid JSON"):
        parse_surface_spec("{kind: sphere")


def test_run_config_validation():
    spec = parse_surface_spec('{"kind": "sphere", "R": 1}')
    with pytest.raises(InvalidValue):
        RunConfig("spectrum", spec, window=(0.8, 0.2))
    with pytest.raises(InvalidValue):
        RunConfig("spectrum", spec, alpha=3.0)
    with pytest.raises(InvalidValue):
        RunConfig("spectrum", spec, symbol="nope")
    a, b = RunConfig("weyl", spec, out="x"), RunConfig("weyl", spec, out="y")
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != RunConfig("weyl", spec, seed=1).config_hash()


def test_flags_and_environment(tmp_path, monkeypatch):
    surf = tmp_path / "s.json"
    surf.write_text('{"kind": "sphere", "R": 1, "resolution": [20, 40]}')
    cfg = config_from_args(["weyl", "--surface", str(surf), "--h-schedule", "0.1,0.05", "--window", "0.1,0.9"])
    assert cfg.resolution == (20, 40) and cfg.h_schedule == [0.1, 0.05] and cfg.window == (0.1, 0.9)
    monkeypatch.setenv("PLASMONIC_RESOLUTION", "12x24")
    monkeypatch.setenv("PLASMONIC_SEED", "9")
    cfg = config_from_args(["geometry", "--surface", str(surf)])
    assert cfg.resolution == (12, 24) and cfg.seed == 9
    cfg = config_from_args(["geometry", "--surface", str(surf), "--resolution", "16x32"])
    assert cfg.resolution == (16, 32)


def test_geometry_command_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["geometry", "--surface", '{"kind": "sphere", "R": 1}', "--resolution", "8x16", "--out", str(out)]) == 0
    lines = (out / "geometry.csv").read_text().splitlines()
    assert lines[0] == ",".join(GEOMETRY_COLUMNS)
    assert len(lines) == 1 + 8 * 16
    manifest = json.loads((out / "manifest.json").read_text())
    for key in ("config_hash", "surface_hash", "versions", "wall_time_s", "artifacts"):
        assert key in manifest
    for name, digest in manifest["artifacts"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    assert not [p for p in os.listdir(out) if p.startswith(".tmp")]


def test_exit_codes(tmp_path, capsys):
    out = tmp_path / "err"
    assert main(["geometry", "--surface", str(tmp_path / "missing.json"), "--out", str(out)]) == 2
    rec = json.loads((out / "error.json").read_text())
    assert rec["exit_code"] == 2 and rec["error"] == "invalid_value"
    # an h far above every eigenvalue leaves the window empty: a numerical failure
    code = main(["variance", "--surface", '{"kind": "sphere", "R": 1}', "--resolution", "16x32",
                 "--h-schedule", "100", "--out", str(tmp_path / "num")])
    assert code == 3
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "empty_window"
    assert main(["no-such-command"]) == 2


def test_csv_formatting_is_exact():
    text = csv_text(["a", "b", "c"], [[1, 0.1, float("nan")], [2, 1e-300, True]])
    assert text == "a,b,c\n1,0.1,nan\n2,1e-300,true\n"


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "f.txt"
    atomic_write(str(p), "one")
    atomic_write(str(p), b"two")
    assert p.read_text() == "two"
    assert os.listdir(tmp_path) == ["f.txt"]


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "plasmonic", "spectrum", "--surface", '{"kind": "sphere", "R": 1}',
                          "--resolution", "8x16", "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    header = (tmp_path / "eigentable.csv").read_text().splitlines()[0]
    assert header == "index,m,lambda,c"
