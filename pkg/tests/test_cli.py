import json
import shutil
import subprocess
import sys

import pytest

from plucase.cli import main
from plucase.rucm import load_specification


@pytest.fixture
def sto_args(sto_dir):
    return ["--pl-spec", str(sto_dir / "pl.rucm"), "--pl-diagram", str(sto_dir / "diagram.json"),
            "--decisions", str(sto_dir / "decisions.P1.json"), "--decisions", str(sto_dir / "decisions.P2.json")]


def test_validate_ok(sto_args, capsys):
    assert main(["validate", *sto_args]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_validate_findings(sto_dir, tmp_path, capsys):
    data = json.loads((sto_dir / "decisions.P1.json").read_text())
    data["diagram_decisions"].pop(0)
    bad = tmp_path / "decisions.PX.json"
    bad.write_text(json.dumps(data))
    rc = main(["validate", "--pl-spec", str(sto_dir / "pl.rucm"), "--pl-diagram", str(sto_dir / "diagram.json"),
               "--decisions", str(bad)])
    assert rc == 1
    out = capsys.readouterr().out
    assert out.startswith("decisions P1: Method of Providing Data") and "mandatory variation point" in out


@pytest.mark.parametrize("argv", [
    ["validate"],
    ["validate", "--pl-spec", "missing.rucm", "--pl-diagram", "missing.json"],
    ["classify", "--new", "P2"],
])
def test_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err.startswith("error: ")


def test_configure_writes_products(sto_args, sto_dir, tmp_path):
    assert main(["configure", *sto_args, "--out", str(tmp_path)]) == 0
    assert load_specification(tmp_path / "ps.P1.rucm") == load_specification(sto_dir / "ps_P1.rucm")
    assert json.loads((tmp_path / "ps_diagram.P2.json").read_text())["variation_points"] == []


def test_diff_of_identical_models_is_empty(sto_args, capsys):
    assert main(["diff", *sto_args, "--previous", "P1", "--new", "P1"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert not data["added"] and not data["deleted"] and not data["updated"]


def test_diff_sto(sto_args, capsys):
    assert main(["diff", *sto_args, "--previous", "P1", "--new", "P2"]) == 0
    assert len(json.loads(capsys.readouterr().out)["updated"]) == 6


def test_classify_sto(sto_args, sto_dir, tmp_path, capsys):
    rc = main(["classify", *sto_args, "--previous", "P1", "--new", "P2", "--traces", str(sto_dir / "traces.P1.csv"),
               "--out", str(tmp_path), "--format", "json"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "P1 -> P2: obsolete=1 retestable=2 reusable=0 new=2" in out
    assert sorted(p.name for p in tmp_path.iterdir()) == ["impact.json"]


@pytest.mark.parametrize("form", ["tagged", "untagged"])
def test_trace_file_tagging(sto_args, sto_dir, tmp_path, form):
    plain = tmp_path / "links.csv"
    shutil.copy(sto_dir / "traces.P1.csv", plain)
    item = f"P1={plain}" if form == "tagged" else str(plain)
    assert main(["classify", *sto_args, "--previous", "P1", "--new", "P2", "--traces", item,
                 "--out", str(tmp_path / "o")]) == 0


def test_untagged_traces_with_several_products(sto_args, sto_dir, tmp_path, capsys):
    plain = tmp_path / "links.csv"
    shutil.copy(sto_dir / "traces.P1.csv", plain)
    rc = main(["classify", *sto_args, "--previous", "P1", "--previous", "P2", "--new", "P2",
               "--traces", str(plain), "--out", str(tmp_path)])
    assert rc == 2 and "PRODUCT=path" in capsys.readouterr().err


def test_toml_config_and_flag_precedence(sto_dir, tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text(f"""[plucase]
pl_spec = "{sto_dir / 'pl.rucm'}"
pl_diagram = "{sto_dir / 'diagram.json'}"
decisions = ["{sto_dir / 'decisions.P1.json'}", "{sto_dir / 'decisions.P2.json'}"]
traces = "{sto_dir / 'traces.P1.csv'}"
previous = "P1"
new = "P2"
format = ["csv"]
out = "{tmp_path / 'from_config'}"
""")
    assert main(["report", "--config", str(cfg), "--out", str(tmp_path / "from_flag")]) == 0
    assert (tmp_path / "from_flag" / "impact.csv").exists()
    assert not (tmp_path / "from_config").exists()
    assert "whole line: reusable=0 retestable=2 manual=0 obsolete=1 new=2" in capsys.readouterr().out


def test_bad_toml(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("pl_spec = \n")
    assert main(["validate", "--config", str(cfg)]) == 2


def test_prioritize_and_evaluate(line, tmp_path, capsys):
    paths = line.write(tmp_path / "in")
    new = line.products[-1]
    common = ["--history", paths["history"], "--new", new, "--out", str(tmp_path)]
    assert main(["prioritize", "--features", paths["features"], *common]) == 0
    model = json.loads((tmp_path / "model.json").read_text())
    assert set(model["retained_factors"]) <= {"V", "S", "FP", "FV", "R"}
    assert model["training_rows"] > 0
    assert main(["evaluate", "--ranking", str(tmp_path / "ranking.csv"), *common]) == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["applicable"] and 0 < metrics["auc_ratio"] <= 1.0


def test_evaluate_without_failures(tmp_path):
    (tmp_path / "ranking.csv").write_text("rank,test_id,probability,is_new_scenario\n1,a,,0\n")
    (tmp_path / "h.csv").write_text("product_id,version_id,test_id,verdict\nP,V1,a,pass\n")
    assert main(["evaluate", "--ranking", str(tmp_path / "ranking.csv"), "--history", str(tmp_path / "h.csv"),
                 "--new", "P", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "metrics.json").read_text())["applicable"] is False


def test_version_via_module():
    out = subprocess.run([sys.executable, "-m", "plucase.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("plucase ")
