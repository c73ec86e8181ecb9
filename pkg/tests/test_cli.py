import csv
import json
import subprocess
import sys

import jsonschema
import pytest

from stericzip.cli import main
from stericzip.problems import model_problem
from stericzip.structure import parse_pdb, read_pdb


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def error_of(err, schema):
    doc = json.loads(err)
    jsonschema.validate(doc, schema("error"))
    return doc


def test_build_model(tmp_path, capsys, schema):
    out, rep, trace = tmp_path / "m.pdb", tmp_path / "m.json", tmp_path / "t.csv"
    code, stdout, _ = run(capsys, "build", "--model", 1, "--optimizer", "lbfgs", "--out", out, "--report", rep, "--trace", trace)
    assert code == 0
    assert "H3.ALA.CB" in stdout
    s = read_pdb(out)
    assert s.chain_ids == tuple("ABCDEFGHIJKL")
    doc = json.loads(rep.read_text())
    jsonschema.validate(doc, schema("contact-report"))
    assert all(abs(c["distance"] - 3.4) < 1e-3 for c in doc["contacts"])
    assert trace.read_text().startswith("iteration,f,grad_rms\n")


def test_build_defaults_to_cwd(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(capsys, "build", "--model", 2, "--optimizer", "lbfgs")[0] == 0
    assert (tmp_path / "model2.pdb").exists() and (tmp_path / "model2.report.json").exists()


def test_build_recipe_and_config(tmp_path, capsys, fixture_pdb_text, schema):
    template = tmp_path / "t.pdb"
    template.write_text(fixture_pdb_text)
    recipe = tmp_path / "r.json"
    recipe.write_text(json.dumps({"model": 3, "optimizer": "saec", "seed": 4, "transform": "derived"}))
    cfg = tmp_path / "c.cfg"
    cfg.write_text("saec.generations = 10\n")
    code, _, _ = run(
        capsys, "build", "--recipe", recipe, "--template", template, "--config", cfg,
        "--out", tmp_path / "o.pdb", "--report", tmp_path / "o.json",
    )
    assert code == 0
    doc = json.loads((tmp_path / "o.json").read_text())
    assert doc["transform"]["mode"] == "derived"
    assert doc["optimizer"]["method"] == "saec"


def test_build_to_stdout(capsys):
    code, out, _ = run(capsys, "build", "--model", 1, "--optimizer", "lbfgs", "--out", "-", "--report", "/dev/null")
    assert code == 0
    assert parse_pdb(out).n_atoms() > 0


def test_solve_dg(capsys, schema, tmp_path):
    code, out, _ = run(capsys, "solve-dg", "--builtin", 2)
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema("dg-solution"))
    assert doc["objective"] <= doc["published_optimum"]["objective"]
    assert doc["notes"] and doc["infeasibility"][0]["infeasible"]

    prob = tmp_path / "p.json"
    prob.write_text(json.dumps(model_problem(1).to_json()))
    code, out, _ = run(capsys, "solve-dg", "--problem", prob, "--optimizer", "cg")
    doc = json.loads(out)
    assert code == 0 and doc["objective"] < 1e-8 and "published_optimum" not in doc


def test_fit_axis(capsys, schema, tmp_path, fixture_pdb_text):
    code, out, _ = run(capsys, "fit-axis", "--builtin-strand", "B")
    doc = json.loads(out)
    jsonschema.validate(doc, schema("axis-fit"))
    assert code == 0 and doc["cosine"] >= 1 - 1e-6 and doc["warnings"] == []

    pdb = tmp_path / "f.pdb"
    pdb.write_text(fixture_pdb_text)
    code, out, _ = run(capsys, "fit-axis", "--pdb", pdb, "--chain", "H")
    jsonschema.validate(json.loads(out), schema("axis-fit"))
    code, _, err = run(capsys, "fit-axis", "--pdb", pdb, "--chain", "Z")
    assert code == 4 and error_of(err, schema)["error"] == "AddressError"


def test_lj(capsys, schema, tmp_path):
    code, out, _ = run(capsys, "lj", "--cluster", 3, "--seed", 1)
    doc = json.loads(out)
    jsonschema.validate(doc, schema("lj-cluster"))
    assert code == 0 and abs(doc["energy"] + 3.0) < 1e-3

    curve = tmp_path / "c.csv"
    assert run(capsys, "lj", "--curve", "--epsilon", 2, "--samples", 11, "--out", curve)[0] == 0
    rows = list(csv.DictReader(curve.open()))
    assert len(rows) == 11 and float(rows[0]["r"]) == pytest.approx(0.9)


@pytest.mark.parametrize("objective", ["lj-cluster", "dg-model1", "axis-fit"])
def test_check_grad(capsys, schema, objective):
    code, out, _ = run(capsys, "check-grad", "--objective", objective, "--trials", 20)
    doc = json.loads(out)
    jsonschema.validate(doc, schema("grad-check"))
    assert code == 0 and doc["passed"] and len(doc["relative_errors"]) == 20


@pytest.mark.parametrize(
    "argv",
    [
        ["build", "--model", 4],
        ["build"],
        ["lj"],
        ["lj", "--curve"],
        ["lj", "--cluster", 1],
        ["check-grad", "--objective", "nope"],
        ["check-grad", "--objective", "axis-fit", "--trials", 0],
        ["fit-axis"],
    ],
)
def test_usage_errors(capsys, schema, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert error_of(err, schema)["exit_code"] == 2


def test_malformed_inputs(capsys, schema, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert run(capsys, "solve-dg", "--problem", bad)[0] == 2
    assert run(capsys, "build", "--recipe", bad)[0] == 2
    cfg = tmp_path / "c.cfg"
    cfg.write_text("sa.bogus = 1\n")
    assert run(capsys, "solve-dg", "--builtin", 1, "--config", cfg)[0] == 2
    code, _, err = run(capsys, "solve-dg", "--problem", tmp_path / "missing.json")
    assert code == 4 and error_of(err, schema)


def test_fetch_offline_exit_code(capsys, schema, tmp_path, monkeypatch):
    import stericzip.fetch as fetch

    def offline(url, timeout):
        raise fetch.urllib.error.URLError("offline")

    monkeypatch.setattr(fetch.urllib.request, "urlopen", offline)
    monkeypatch.setenv(fetch.CACHE_ENV, str(tmp_path))
    code, _, err = run(capsys, "build", "--fetch", "3NHD", "--model", 1)
    assert code == 5
    assert "--template" in error_of(err, schema)["message"]


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "stericzip.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("stericzip ")
