import json
import os

import numpy as np
import pytest

from bremermann import read_field_csv
from bremermann.cli import main

DISC = {"kind": "ball", "n": 1, "params": {"radius": 1.0}}
PARABOLA = {"kind": "paraboloid", "n": 1, "params": {"scale": 1.0}}


def write(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def load(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def test_solve_bounded_outputs(tmp_path):
    man = write(tmp_path, {"command": "solve-bounded", "domain": DISC, "trace_expr": "re(z1) + 1",
                           "spacing": 0.1, "box": [[-1.2, 1.2]] * 2})
    out = tmp_path / "out"
    assert main(["solve-bounded", "--manifest", man, "--out", str(out)]) == 0
    rep = load(out / "report.json")
    assert rep["psh_test"]["pass"]
    assert rep["harmonic_oracle"]["sup_gap"] < 1e-8
    flat, classes, coords, values = read_field_csv(out / "phi.csv")
    np.testing.assert_allclose(values, coords[:, 0] + 1, atol=1e-10)
    resolved = load(out / "manifest.json")
    assert resolved["output_dir"] == str(out) and resolved["trace_expr"] == "re(z1) + 1"


def test_overrides_reach_the_resolved_manifest(tmp_path):
    man = write(tmp_path, {"command": "qsolve", "domain": DISC, "trace_expr": "x1^2",
                           "box": [[-1.2, 1.2]] * 2})
    out = tmp_path / "q"
    assert main(["qsolve", "--manifest", man, "--out", str(out), "--spacing", "0.2", "--tol", "1e-9"]) == 0
    resolved = load(out / "manifest.json")
    assert resolved["spacing"] == 0.2 and resolved["cfg"]["tol_iter"] == 1e-9
    assert load(out / "qcheck.json")["is_q_psh"]


def test_command_mismatch_and_bad_manifest(tmp_path, capsys):
    man = write(tmp_path, {"command": "sandwich", "domain": DISC})
    assert main(["solve-bounded", "--manifest", man]) == 1
    bad = write(tmp_path, {"command": "sandwich", "domain": DISC, "typo": 1}, "bad.json")
    assert main(["sandwich", "--manifest", bad]) == 1
    assert "ManifestError" in capsys.readouterr().err
    assert main(["sandwich", "--manifest", str(tmp_path / "missing.json")]) == 1


def test_bad_expression_exit_code(tmp_path, capsys):
    man = write(tmp_path, {"command": "solve-bounded", "domain": DISC, "trace_expr": "x1 + q",
                           "box": [[-1.2, 1.2]] * 2, "spacing": 0.2})
    assert main(["solve-bounded", "--manifest", man, "--out", str(tmp_path / "o")]) == 1
    assert "column 6" in capsys.readouterr().err


def test_unbounded_needs_box(tmp_path):
    man = write(tmp_path, {"command": "solve-bounded", "domain": PARABOLA})
    assert main(["solve-bounded", "--manifest", man, "--out", str(tmp_path / "o")]) == 1


@pytest.mark.parametrize("kind, growth, params, code", [
    ("linear", "1", {}, 0),
    ("exponential", "exp(2*x1)", {"a": 1.0, "alpha": 0.9}, 2),
])
def test_certify_exit_codes(tmp_path, kind, growth, params, code):
    dom = PARABOLA if kind == "linear" else {"kind": "strip_convex", "n": 1, "params": {}}
    man = write(tmp_path, {"command": "certify-continuity", "domain": dom,
                           "certificate": {"kind": kind, "eps": 0.1, "z0": [1.0, 0.0], "params": params,
                                           "growth_expr": growth}})
    out = tmp_path / kind
    assert main(["certify-continuity", "--manifest", man, "--out", str(out)]) == code
    cert = load(out / "certificate.json")
    assert cert["granted"] is (code == 0)


def test_lupacciolu_command(tmp_path):
    dom = {"kind": "ball", "n": 1, "params": {"radius": 0.5, "center": [3.0, 0.0]}}
    man = write(tmp_path, {"command": "check-lupacciolu", "domain": dom,
                           "lupacciolu": {"terms": [[2.0, [1]]], "sample_points": 64}})
    out = tmp_path / "l"
    assert main(["check-lupacciolu", "--manifest", man, "--out", str(out)]) == 0
    assert load(out / "lupacciolu.json")["holds"]


def test_sandwich_and_properties(tmp_path):
    base = {"domain": DISC, "trace_expr": "abs(y1)", "spacing": 0.2, "box": [[-1.2, 1.2]] * 2}
    man = write(tmp_path, dict(base, command="sandwich"))
    assert main(["sandwich", "--manifest", man, "--out", str(tmp_path / "s")]) == 0
    assert load(tmp_path / "s" / "sandwich.json")["pluriharmonic"]
    for name in ("phi", "eta", "chi"):
        assert os.path.exists(tmp_path / "s" / f"{name}.csv")
    man = write(tmp_path, dict(base, command="properties", properties={"h2_expr": "abs(y1) + x1^2", "c": 0.5}),
                "p.json")
    assert main(["properties", "--manifest", man, "--out", str(tmp_path / "p")]) == 0
    assert "pass" in load(tmp_path / "p" / "properties.json")


def test_continuous_solution_command(tmp_path):
    man = write(tmp_path, {"command": "continuous-solution", "domain": DISC, "trace_expr": "1 + x1",
                           "spacing": 0.1, "box": [[-1.2, 1.2]] * 2})
    out = tmp_path / "c"
    assert main(["continuous-solution", "--manifest", man, "--out", str(out)]) == 0
    rep = load(out / "report.json")
    assert rep["psh_ok"] and rep["boundary_residual"] <= 1e-12


def test_solve_unbounded_in_two_variables(tmp_path):
    dom = {"kind": "paraboloid", "n": 2, "params": {"scale": 1.0}}
    man = write(tmp_path, {"command": "solve-unbounded", "domain": dom, "trace_expr": "1/(1 + x1^2 + y1^2 + x2^2 + y2^2)",
                           "spacing": 0.5, "plan": {"nu_max": 2}})
    out = tmp_path / "u"
    assert main(["solve-unbounded", "--manifest", man, "--out", str(out)]) == 0
    conv = load(out / "convergence.json")
    assert conv["monotone_ok"] and conv["boundary_ok"]
    for name in ("phi.csv", "phi_nu1.csv", "phi_nu2.csv"):
        assert os.path.exists(out / name)
