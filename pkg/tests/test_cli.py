import json
import os

import numpy as np
import pytest

from causticflow.cli import main


def run(args):
    return main(args)


def test_caustic_command(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("""
[function]
form = elliptic-umbilic
t = 1.0
[fiber_window]
center = -0.5 0
half_width = 1.1
resolution = 256
""")
    out = tmp_path / "out"
    assert run(["caustic", "--config", str(cfg), "--out", str(out)]) == 0
    doc = json.loads((out / "caustic.json").read_text())
    assert len(doc["cusps"]) == 3
    assert (out / "caustic.svg").read_text().startswith("<svg")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "caustic"
    assert manifest["config"]["tolerances"]["tol_locus"] == 1e-9


def test_caustic_empty_window(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("""
[function]
form = hyperbolic-umbilic
[fiber_window]
center = -10 -10
half_width = 0.5
resolution = 64
""")
    out = tmp_path / "out"
    assert run(["caustic", "--config", str(cfg), "--out", str(out)]) == 0
    doc = json.loads((out / "caustic.json").read_text())
    assert doc["components"] == []


def test_invalid_polynomial_text(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("""
[function]
poly = y3 + oops
""")
    assert run(["caustic", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_degree_cap(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("""
[function]
poly = y1^9
""")
    assert run(["caustic", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_unknown_key_named(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[function]\nbogus = 1\n")
    assert run(["caustic", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "bogus" in err


def test_empty_window_rejected(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("""
[function]
form = hyperbolic-umbilic
[fiber_window]
half_width = 0
""")
    assert run(["caustic", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_portrait_command(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("""
[function]
form = hyperbolic-umbilic
[fiber_window]
half_width = 3
resolution = 64
[portrait]
x = 1 1
""")
    out = tmp_path / "out"
    assert run(["portrait", "--config", str(cfg), "--out", str(out)]) == 0
    doc = json.loads((out / "portrait.json").read_text())
    assert len(doc["critical_points"]) == 4
    assert doc["connections"] == []
    csv = (out / "trajectories.csv").read_text().splitlines()
    assert csv[0] == "saddle,branch,step,y1,y2"
    assert len(csv) > 10


def test_portrait_on_caustic_exit3(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("""
[function]
form = hyperbolic-umbilic
[fiber_window]
half_width = 3
resolution = 64
[portrait]
x = 1 0
""")
    out = tmp_path / "out"
    assert run(["portrait", "--config", str(cfg), "--out", str(out)]) == 3
    doc = json.loads((out / "portrait.json").read_text())
    assert "on-caustic" in doc["flags"]
    assert all(c["kind"] == "degenerate" for c in doc["critical_points"])


def _channel_cfg(tmp_path, grid=12):
    cfg = tmp_path / "chan.cfg"
    cfg.write_text(f"""
[function]
poly = 0.2*y1^5 + -1*y1 + -0.5*y1*y2^2
[fiber_window]
half_width = 3
resolution = 64
[base_window]
center = 0.2 0
half_width = 1.2 0.8
[diagram]
grid = {grid}
""")
    return cfg


def test_diagram_command_and_validate(tmp_path):
    cfg = _channel_cfg(tmp_path)
    out = tmp_path / "out"
    assert run(["diagram", "--config", str(cfg), "--out", str(out)]) == 0
    doc = json.loads((out / "diagram.json").read_text())
    assert len(doc["strata"]) == 1
    assert all(c["passed"] for c in doc["validation"])
    report = (out / "report.txt").read_text()
    assert "all checks passed" in report
    # re-validate the emitted document
    assert run(["validate", str(out / "diagram.json")]) == 0


def test_validate_flags_tampered_diagram(tmp_path):
    cfg = _channel_cfg(tmp_path)
    out = tmp_path / "out"
    assert run(["diagram", "--config", str(cfg), "--out", str(out)]) == 0
    doc = json.loads((out / "diagram.json").read_text())
    stratum = doc["strata"][0]
    reversed_copy = json.loads(json.dumps(stratum))
    reversed_copy["pair"] = [stratum["pair"][1], stratum["pair"][0]]
    doc["strata"].append(reversed_copy)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert run(["validate", str(bad)]) == 4


def test_diagram_determinism(tmp_path):
    cfg = _channel_cfg(tmp_path)
    out1 = tmp_path / "r1"
    out2 = tmp_path / "r2"
    assert run(["diagram", "--config", str(cfg), "--out", str(out1), "--seed", "3"]) == 0
    assert run(["diagram", "--config", str(cfg), "--out", str(out2), "--seed", "3"]) == 0
    b1 = (out1 / "diagram.json").read_bytes()
    b2 = (out2 / "diagram.json").read_bytes()
    assert b1 == b2


def test_coarse_diagram_degrades_gracefully(tmp_path):
    cfg = _channel_cfg(tmp_path, grid=8)
    out = tmp_path / "coarse"
    code = run(["diagram", "--config", str(cfg), "--out", str(out)])
    assert code == 0
    doc = json.loads((out / "diagram.json").read_text())
    assert all(c["passed"] for c in doc["validation"])


def test_slices_command(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("""
[slices]
t_values = 1 0
resolution = 128
""")
    out = tmp_path / "out"
    assert run(["slices", "--config", str(cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "slices.json").read_text())
    assert summary["cusp_counts"] == [3, 0]
    assert summary["degenerate_counts"] == [0, 1]
