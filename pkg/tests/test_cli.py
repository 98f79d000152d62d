import csv
import json

import pytest

from twistdn import checks, cli
from twistdn.geometry import read_mesh


def test_mesh_command(tmp_path):
    assert cli.main(["mesh", "--set", "h=0.2", "--out", str(tmp_path)]) == 0
    mesh = read_mesh(tmp_path / "mesh.txt")
    assert mesh.h <= 0.3
    assert (tmp_path / "mesh.config").read_text().startswith("section = unit_disc\n")


def test_dn_command_laplace_diagonal(tmp_path):
    code = cli.main(["dn", "--set", "a=0", "--set", "xi=0", "--set", "h=0.1", "--set", "K=3", "--out", str(tmp_path)])
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "dn_diag.csv", newline="")))
    assert [int(r["k"]) for r in rows] == [-3, -2, -1, 0, 1, 2, 3]
    for r in rows:
        assert float(r["re"]) == pytest.approx(abs(int(r["k"])), rel=2e-2, abs=1e-12)
    meta = json.loads((tmp_path / "dn.json").read_text())["meta"]
    assert meta["a"] == 0 and meta["variant"] == "standard"


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# demo\nsection = ellipse:0.5,0.5\nh = 0.1\nvariant = bullet\na = 1.1\nxi = 0.5\n")
    out = tmp_path / "out"
    assert cli.main(["dn", "--config", str(cfg), "--set", "K=2", "--out", str(out)]) == 0
    meta = json.loads((out / "dn.json").read_text())["meta"]
    assert meta["variant"] == "bullet" and meta["K"] == 2 and meta["a"] == 1.1


def test_invert_command(tmp_path):
    args = ["invert", "--set", "h=0.2", "--set", "K=3", "--set", "xi_half_width=6", "--set", "xi_step=0.375",
            "--set", "a=0.3", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    rec = json.loads((tmp_path / "recovery.json").read_text())
    assert abs(rec["a_hat"] - 0.3) <= 1e-3
    assert (tmp_path / "misfit.csv").read_text().startswith("a,misfit\n")


def test_invalid_config_exit_code(tmp_path, capsys):
    assert cli.main(["dn", "--set", "h=-1", "--out", str(tmp_path)]) == 2
    assert cli.main(["dn", "--set", "bogus=1", "--out", str(tmp_path)]) == 2
    assert cli.main(["dn", "--set", "K=x", "--out", str(tmp_path)]) == 2
    assert cli.main(["dn", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_numerical_failure_exit_code(tmp_path, capsys):
    assert cli.main(["dn", "--set", "a=1.2", "--set", "h=0.3", "--out", str(tmp_path)]) == 3
    assert "CoercivityError" in capsys.readouterr().err
    assert cli.main(["dn", "--set", "family=true", "--set", "xi_half_width=3", "--set", "h=0.3",
                     "--out", str(tmp_path)]) == 3


def test_verify_exit_code_on_failure(tmp_path, monkeypatch):
    monkeypatch.setattr(checks, "run_checks", lambda *a, **k: [checks.CheckResult("always fails", 1.0, 0.0)])
    assert cli.main(["verify", "--out", str(tmp_path)]) == 1
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["passed"] is False


def test_threads_flag(tmp_path, monkeypatch):
    monkeypatch.setenv("TWISTDN_THREADS", "1")
    assert cli.main(["mesh", "--set", "h=0.3", "--out", str(tmp_path)]) == 0
    assert cli.main(["mesh", "--threads", "1", "--set", "h=0.3", "--out", str(tmp_path)]) == 0


def test_stability_and_approx_commands(tmp_path):
    base = ["--set", "h=0.25", "--set", "K=2", "--set", "xi_half_width=6", "--set", "xi_step=0.375"]
    assert cli.main(["stability", *base, "--set", "a_grid=-0.2,0,0.2", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "stability.json").read_text())
    assert rep["c_hat"] > 0 and rep["reduced_bound_holds"]
    assert cli.main(["approx", *base, "--set", "approx_h=0.1", "--set", "a_values=0.9,1,1.1",
                     "--out", str(tmp_path)]) == 0
    assert (tmp_path / "approx.csv").read_text().startswith("a,difference,ratio,worst_xi\n")
