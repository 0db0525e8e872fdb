import csv
import json
import math

import jsonschema
import pytest

from subdivlab.cli import main
from subdivlab.experiments import RunConfig, run
from subdivlab.report import Claim, SummaryReport, emit, load_schema


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_claim_kinds():
    assert Claim("a", 1.0, 1.05, 0.1).passed
    assert not Claim("a", 1.0, 1.2, 0.1).passed
    assert Claim("b", 1.0, 0.5, 0.0, "upper_bound").passed
    assert not Claim("b", 1.0, 1.5, 0.0, "upper_bound").passed
    assert Claim("c", 0.001, 0.5, 0.0, "lower_bound").passed
    assert not Claim("c", 0.001, 0.0001, 0.0, "lower_bound").passed
    assert not Claim("d", 0.0, math.nan, 1.0).passed
    with pytest.raises(ValueError):
        Claim("e", 0, 0, 0, "approx")


def test_empty_report_is_valid(tmp_path):
    rep = SummaryReport("verify", {"seed": 1})
    path = emit(rep, "json", tmp_path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    jsonschema.validate(doc, load_schema())
    assert doc["claims"] == [] and doc["all_pass"] is True
    path = emit(rep, "csv", tmp_path)
    assert path.read_text(encoding="utf-8") == "name,kind,expected,observed,tolerance,pass\n"


def test_json_and_csv_carry_same_numbers(tmp_path):
    rep = SummaryReport("quad", {"seed": 3})
    rep.add(Claim("x = 1/3", 1 / 3, 0.3333, 1e-3), Claim("bound", -0.1438, -0.51, 1e-12, "upper_bound"))
    doc = json.loads(emit(rep, "json", tmp_path).read_text(encoding="utf-8"))
    with emit(rep, "csv", tmp_path).open(encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for j, c in zip(doc["claims"], rows):
        assert j["name"] == c["name"] and j["kind"] == c["kind"]
        for k in ("expected", "observed", "tolerance"):
            assert j[k] == float(c[k])
        assert str(j["pass"]).lower() == c["pass"]


def test_bad_format(tmp_path):
    with pytest.raises(ValueError):
        emit(SummaryReport("quad", {"seed": 1}), "xml", tmp_path)


def test_usage_errors(tmp_path, capsys):
    assert main(["nonsense"]) == 2
    assert main(["quad", "--steps", "0", "--out", str(tmp_path)]) == 2
    assert main(["quad", "--check", "moments", "--out", str(tmp_path)]) == 2
    assert main(["bisector", "--x-grid", "a,b", "--out", str(tmp_path)]) == 2
    assert main(["quad", "--seed", "-4", "--out", str(tmp_path)]) == 2
    with pytest.raises(ValueError):
        RunConfig("quad", replicas=0)


def test_claim_failure_exit_code_and_report(tmp_path):
    # X_1 is always the midpoint, so the uniform-law row must fail
    code = main(["quad", "--check", "limit", "--steps", "1", "--replicas", "1000", "--out", str(tmp_path)])
    assert code == 1
    doc = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert doc["all_pass"] is False and doc["claims"][0]["pass"] is False


def test_quad_rate_run(tmp_path):
    assert main(["quad", "--check", "rate", "--out", str(tmp_path), "--format", "csv"]) == 0
    lines = (tmp_path / "quad_trajectory.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "step,ux,uy,vx,vy,defect" and len(lines) == 42
    assert (tmp_path / "report.csv").exists()


def test_report_validates_against_schema(tmp_path):
    assert main(["subtriangle", "--check", "tail", "--replicas", "20000", "--out", str(tmp_path), "--timing"]) == 0
    doc = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    jsonschema.validate(doc, load_schema())
    assert doc["wall_clock_seconds"] > 0
    assert doc["artifacts"] == ["subtriangle_tail.csv"]
    assert doc["config"]["z_grid"] == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]


def test_z_grid_range_form(tmp_path):
    assert main(["subtriangle", "--check", "tail", "--replicas", "5000", "--z-grid", "1:3:3", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "subtriangle_tail.csv").read_text(encoding="utf-8").splitlines()
    assert [r.split(",")[0] for r in rows[1:]] == ["1.0", "2.0", "3.0"]


@pytest.mark.parametrize(
    "argv",
    [
        ["quad", "--check", "limit", "--replicas", "70000"],
        ["bisector", "--check", "moments", "--steps", "20", "--replicas", "70000", "--resolution", "10", "--bins", "20"],
        ["subtriangle", "--check", "lyapunov", "--steps", "100", "--replicas", "70000"],
        ["subtriangle", "--check", "limit", "--steps", "20", "--replicas", "70000"],
    ],
)
def test_rerun_is_byte_identical(tmp_path, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    main([*argv, "--out", str(a), "--threads", "1"])
    main([*argv, "--out", str(b), "--threads", "3"])
    fa, fb = _files(a), _files(b)
    assert fa.keys() == fb.keys() and len(fa) >= 2
    for name in fa:
        assert fa[name] == fb[name], name


def test_bisector_outputs(tmp_path):
    rep = run(RunConfig("bisector", check="moments", steps=30, replicas=5000, resolution=8, bins=10, out=tmp_path))
    assert set(rep.artifacts) == {"bisector_samples.csv", "bisector_ternary.csv", "bisector_angles.csv", "bisector_moments.json"}
    header = (tmp_path / "bisector_samples.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "replica,a,b,c"
    moments = json.loads((tmp_path / "bisector_moments.json").read_text(encoding="utf-8"))
    assert moments["moments"]["n_samples"] == 5000 and moments["config"]["seed"] == rep.config["seed"]
    assert any(c.name == "E ᾱ² = 1/7" for c in rep.claims)
    with (tmp_path / "bisector_ternary.csv").open(encoding="utf-8") as fh:
        assert sum(int(r["count"]) for r in csv.DictReader(fh)) == 5000
    with (tmp_path / "bisector_angles.csv").open(encoding="utf-8") as fh:
        assert sum(int(r["count"]) for r in csv.DictReader(fh)) == 15000


def test_subtriangle_trajectory_columns(tmp_path):
    run(RunConfig("subtriangle", check="lyapunov", steps=100, replicas=50, out=tmp_path))
    lines = (tmp_path / "subtriangle_trajectory.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "replica,step,x,y,log_y,r,R,S"
    assert len(lines) == 1 + 4 * 100
