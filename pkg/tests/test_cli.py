import csv
import json
import subprocess
import sys

import pytest

from nlslab import __version__
from nlslab.cli import parse_and_dispatch


def run(*argv):
    return subprocess.run([sys.executable, "-m", "nlslab", *argv], capture_output=True, text=True)


def test_version_and_help_need_no_config():
    out = run("--version")
    assert out.returncode == 0 and __version__ in out.stdout
    assert run("--help").returncode == 0
    assert run("instability", "--help").returncode == 0


def test_no_subcommand(capsys):
    assert parse_and_dispatch([]) == 64


def test_missing_config(tmp_path, capsys):
    assert parse_and_dispatch(["groundstate", "--config", str(tmp_path / "nope.json")]) == 64
    assert "does not exist" in capsys.readouterr().err


def test_bad_override_names_key(tmp_path, capsys):
    assert parse_and_dispatch(["groundstate", "--override", "grid.pts=10", "--output-dir", str(tmp_path)]) == 64
    assert "grid.pts" in capsys.readouterr().err


def test_numeric_failure(tmp_path, capsys):
    code = parse_and_dispatch(["groundstate", "--override", "grid.half_length=3", "--override", "grid.points=256",
                               "--output-dir", str(tmp_path)])
    assert code == 1
    assert "numeric failure" in capsys.readouterr().err


def test_groundstate(tmp_path, capsys):
    assert parse_and_dispatch(["groundstate", "--output-dir", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "groundstate.json").read_text())
    assert meta["certified"] and meta["level_m"] == pytest.approx(1.335495209426766, rel=1e-12)
    assert (tmp_path / "phi.csv").read_text().startswith("x,re,im\n")


def test_scan_lambda_rows(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{}")
    code = parse_and_dispatch(["scan-lambda", "--config", str(cfg), "--override", "lambda_range.count=400",
                               "--output-dir", str(tmp_path)])
    assert code == 0
    with open(tmp_path / "scan.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["lambda", "S", "Q", "I"] and len(rows) == 401
    summary = json.loads((tmp_path / "scan.json").read_text())
    assert summary["lambda0"] == pytest.approx(1 / 1.2, rel=1e-8)


def test_admissibility(tmp_path, capsys):
    assert parse_and_dispatch(["admissibility", "--output-dir", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "admissibility.json").read_text())["supercritical"] is True
    code = parse_and_dispatch(["admissibility", "--override", 'nonlinearity={"kind": "pure_power", "p": 3}',
                               "--output-dir", str(tmp_path)])
    assert code == 0
    assert json.loads((tmp_path / "admissibility.json").read_text())["supercritical"] is False


def test_output_dir_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("NLSLAB_OUTPUT_DIR", str(tmp_path / "env"))
    assert parse_and_dispatch(["admissibility"]) == 0
    assert (tmp_path / "env" / "admissibility.json").is_file()


def test_evolve_gaussian(tmp_path, capsys):
    args = ["evolve", "--output-dir", str(tmp_path), "--override", "evolve.initial.kind=gaussian",
            "--override", "evolve.initial.amplitude=0.5", "--override", "evolve.controls.t_max=0.1",
            "--override", "evolve.controls.sample_interval=0.01"]
    assert parse_and_dispatch(args) == 0
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert len(lines) == 12
    assert json.loads((tmp_path / "verdict.json").read_text())["status"] == "stable_window"


def test_evolve_unknown_kind(tmp_path, capsys):
    assert parse_and_dispatch(["evolve", "--output-dir", str(tmp_path), "--override",
                               "evolve.initial.kind=square"]) == 64


def test_instability_quick(tmp_path, capsys):
    args = ["instability", "--output-dir", str(tmp_path), "--override", "instability.grid.points=16384",
            "--override", "instability.controls.blowup_gradient_ratio=20",
            "--override", "instability.variational=false"]
    assert parse_and_dispatch(args) == 0
    assert capsys.readouterr().out.startswith("PASS")


def test_instability_lambda_one(tmp_path, capsys):
    args = ["instability", "--output-dir", str(tmp_path), "--override", "instability.lam=1.0"]
    assert parse_and_dispatch(args) == 64
