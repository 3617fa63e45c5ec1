import csv
import io
import json
from importlib import resources

import jsonschema
import pytest
from click.testing import CliRunner

from trilfa.cli import main
from trilfa.discretizations import GOLDEN_FILES

SCHEMA = json.loads(resources.files("trilfa").joinpath("data/report.schema.json").read_text())


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def _csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_analyze_stokes_diag_twogrid():
    res = run("analyze", "--problem", "stokes", "--smoother", "diag", "--mode", "twogrid", "--nu", 2,
              "--format", "csv")
    assert res.exit_code == 0, res.output
    row = _csv_rows(res.output)[0]
    assert abs(float(row["rho2g"]) - 0.31) <= 0.01


def test_analyze_curlcurl_threegrid():
    res = run("analyze", "--problem", "curlcurl", "--mode", "threegrid", "--cycle", "V", "--nu1", 1, "--nu2", 1,
              "--format", "csv")
    assert res.exit_code == 0, res.output
    assert abs(float(_csv_rows(res.output)[0]["rho3g"]) - 0.13) <= 0.01


def test_analyze_zero_smoothing_is_identity():
    res = run("analyze", "--mode", "smooth", "--nu", 0, "--format", "json")
    assert res.exit_code == 0, res.output
    assert json.loads(res.output)["report"]["mu"] == pytest.approx(1.0, abs=1e-14)


def test_markdown_uses_three_significant_digits():
    res = run("analyze", "--problem", "stokes", "--smoother", "diag", "--nu", 2)
    assert res.exit_code == 0
    assert "| 0.308 |" in res.output or "| 0.31 |" in res.output.replace("0.310", "0.31")


@pytest.mark.parametrize("args", [
    ("analyze", "--problem", "curlcurl", "--smoother", "full"),
    ("analyze", "--smoother", "nonsense"),
    ("analyze", "--nu1", -1),
    ("analyze", "--freq-n", 2),
    ("sweep-omega", "--problem", "curlcurl"),
    ("sweep-omega", "--omega-u", "1.2:0.8:0.05"),
    ("table", "T9"),
])
def test_usage_errors_exit_2(args):
    assert run(*args).exit_code == 2


def test_analysis_failure_exits_1():
    # the vertex blocks are singular at kappa = 0 at every sampled frequency
    res = run("analyze", "--problem", "curlcurl", "--kappa", 0, "--mode", "twogrid")
    assert res.exit_code == 1
    assert "error" in res.output


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "analyze", "problem": "stokes", "smoother": "diag",
                               "mode": "twogrid", "nu": 2, "format": "csv"}))
    base = run("analyze", "--config", cfg)
    assert base.exit_code == 0, base.output
    assert abs(float(_csv_rows(base.output)[0]["rho2g"]) - 0.31) <= 0.01
    over = run("analyze", "--config", cfg, "--nu", 1)
    assert _csv_rows(over.output)[0]["nu1"] == "1"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"problem": "stokes", "colour": "red"}))
    assert run("analyze", "--config", bad).exit_code == 2
    other = tmp_path / "other.json"
    other.write_text(json.dumps({"command": "table"}))
    assert run("analyze", "--config", other).exit_code == 2


@pytest.mark.parametrize("args", [
    ("analyze", "--mode", "threegrid", "--nu1", 2, "--nu2", 1, "--freq-n", 9),
    ("analyze", "--problem", "curlcurl", "--mode", "twogrid", "--freq-n", 9),
    ("table", "T3", "--no-measure", "--freq-n", 9),
    ("sweep-omega", "--omega-u", "1.0:1.1:0.05", "--omega-p", 0.6, "--freq-n", 9),
    ("measure", "--problem", "curlcurl", "--levels", 4),
    ("regenerate-stencils",),
])
def test_json_validates_and_is_deterministic(args):
    first = run(*args, "--format", "json")
    second = run(*args, "--format", "json")
    assert first.exit_code in (0, 1), first.output
    assert first.output == second.output
    jsonschema.validate(json.loads(first.output), SCHEMA)
    csv1, csv2 = run(*args, "--format", "csv"), run(*args, "--format", "csv")
    assert csv1.output == csv2.output


def test_sweep_single_point_echoed():
    res = run("sweep-omega", "--omega-u", 1.05, "--omega-p", 0.6, "--nu", 3, "--freq-n", 17)
    assert res.exit_code == 0, res.output
    lines = res.output.strip().splitlines()
    assert lines[0].split(",")[:2] == ["omega_u", "omega_p"]
    assert len(lines) == 3
    assert lines[-1].startswith("argmin,1.05,0.6")


def test_table_t3_prediction_only():
    res = run("table", "T3", "--no-measure", "--format", "csv")
    assert res.exit_code == 0, res.output
    rows = _csv_rows(res.output)
    first = rows[0]
    assert first["row"] == "(1,0)" and abs(float(first["value"]) - 0.68) <= 0.03


def test_regenerate_stencils_cycle(tmp_path):
    first = run("regenerate-stencils", "--out", tmp_path)
    assert first.exit_code == 0
    second = run("regenerate-stencils", "--out", tmp_path)
    assert second.exit_code == 0
    assert second.output.count("no differences") == len(GOLDEN_FILES)
    path = tmp_path / GOLDEN_FILES["stokes"]
    pristine = path.read_bytes()
    lines = path.read_text().splitlines()
    idx = next(i for i, ln in enumerate(lines) if ln.startswith("0 0 0 0 "))
    lines[idx] = "0 0 0 0 3.5"
    path.write_text("\n".join(lines) + "\n")
    bad = run("regenerate-stencils", "--out", tmp_path)
    assert bad.exit_code == 1
    assert "MISMATCH" in bad.output and "0 0 0 0" in bad.output
    forced = run("regenerate-stencils", "--out", tmp_path, "--force")
    assert forced.exit_code == 0
    assert path.read_bytes() == pristine


def test_installed_golden_files_match_oracle():
    assert run("regenerate-stencils").exit_code == 0


def test_measure_csv_history():
    res = run("measure", "--problem", "curlcurl", "--levels", 4, "--format", "csv")
    assert res.exit_code == 0, res.output
    lines = res.output.strip().splitlines()
    assert lines[0] == "iter,resnorm" and len(lines) == 32


def test_export_mesh(tmp_path):
    out = tmp_path / "m.txt"
    res = run("export-mesh", "--levels", 2, "--out", out)
    assert res.exit_code == 0
    assert "triangles 16" in out.read_text()


def test_out_option_writes_file(tmp_path):
    out = tmp_path / "r.csv"
    res = run("analyze", "--mode", "smooth", "--format", "csv", "--out", out)
    assert res.exit_code == 0 and res.output == ""
    assert out.read_text().startswith("problem,")
