import csv
import json

import pytest

from strata.cli import main
from strata.repositories import RunDirectory

CONFIG = """\
[physics]
density_mode = "eulerian"
gravity = 9.81
depth = 1.0

[density]
kind = "constant"
value = 1000.0

[shear]
kind = "constant"
value = 1.0

[grid]
p_grid_size = 32
dq = 0.5
"""


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "constant.toml"
    path.write_text(CONFIG)
    return path


@pytest.fixture(scope="module")
def branch_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("branch")
    config = root / "constant.toml"
    config.write_text(CONFIG)
    out = root / "run"
    assert main(_continue_args(config, out)) == 0
    return config, out


def _continue_args(config, out):
    return [
        "continue",
        "--config",
        str(config),
        "--out",
        str(out),
        "--epsilon",
        "0.04",
        "--max-points",
        "2",
        "--quiet",
    ]


def test_critical_json(config_path, capsys):
    assert main(["critical", "--config", str(config_path), "--json"]) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["F_cr"] == pytest.approx(1.0, abs=1e-9)
    assert document["mu_N"] == "inf"


def test_critical_table(config_path, capsys):
    assert main(["critical", "--config", str(config_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert any(line.split() == ["F_cr", "1.000000"] for line in lines)
    assert any(line.split() == ["mu_N", "inf"] for line in lines)


def test_critical_writes_run(config_path, tmp_path, capsys):
    out = tmp_path / "critical"
    assert main(["critical", "--config", str(config_path), "--out", str(out)]) == 0
    assert "F_cr" in capsys.readouterr().out
    manifest = RunDirectory(out).read_manifest()
    assert manifest.command == "critical"
    assert set(manifest.outputs) == {"spectrum.json", "phi_cr.csv", "background.csv"}
    RunDirectory(out).verify_outputs(manifest, manifest.outputs)
    assert manifest.finished is not None


def test_missing_config(tmp_path, capsys):
    assert main(["critical", "--config", str(tmp_path / "absent.toml")]) == 2
    assert "INPUT_ERROR" in capsys.readouterr().err


@pytest.mark.parametrize("epsilon", ["0", "0.2", "-0.01"])
def test_solve_rejects_epsilon(config_path, epsilon, capsys):
    assert main(["solve", "--config", str(config_path), "--epsilon", epsilon]) == 2
    assert "epsilon" in capsys.readouterr().err


def test_solve(config_path, tmp_path, capsys):
    out = tmp_path / "solve"
    code = main(
        ["solve", "--config", str(config_path), "--epsilon", "0.04", "--out", str(out),
         "--json"]
    )
    assert code == 0
    document = json.loads(capsys.readouterr().out)
    assert document["amplitude"] == pytest.approx(0.04, rel=0.2)
    assert document["diagnostics"]["status"]["mass_flux"] == "pass"
    run = RunDirectory(out)
    assert run.point_indices() == [0]
    assert run.exists("diagnostics/point_0000.json")
    manifest = run.read_manifest()
    run.verify_outputs(manifest, manifest.outputs)


def test_continue(branch_run):
    _, out = branch_run
    run = RunDirectory(out)
    manifest = run.read_manifest()
    assert manifest.termination_reason == "user_limit"
    assert run.point_indices() == [0, 1]
    with open(out / "curve.csv") as f:
        rows = list(csv.DictReader(f))
    assert [int(r["point"]) for r in rows] == [0, 1]
    assert float(rows[1]["amplitude"]) > float(rows[0]["amplitude"])


def test_continue_refuses_existing_run(branch_run, capsys):
    config, out = branch_run
    assert main(["continue", "--config", str(config), "--out", str(out)]) == 2
    assert "--resume" in capsys.readouterr().err


def test_continue_rejects_bad_limits(config_path, tmp_path):
    with pytest.raises(SystemExit) as e:
        main(
            [
                "continue",
                "--config",
                str(config_path),
                "--out",
                str(tmp_path / "x"),
                "--max-points",
                "0",
            ]
        )
    assert e.value.code == 2


def test_diagnose_and_export(branch_run):
    _, out = branch_run
    assert main(["diagnose", str(out), "--quiet"]) == 0
    run = RunDirectory(out)
    assert run.exists("diagnostics/point_0001.json")
    with open(out / "diagnostics" / "branch_summary.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 2

    assert main(["export", str(out), "--raster", "11", "--dimensional", "--quiet"]) == 0
    for suffix in ("field.csv", "surface.csv", "sidecar.json", "raster.csv"):
        assert run.exists(f"eulerian/point_0000_{suffix}")
    sidecar = json.loads((out / "eulerian" / "point_0000_sidecar.json").read_text())
    assert sidecar["dimensional"] is True

    assert main(["export", str(out), "--format", "json", "--quiet"]) == 0
    document = json.loads((out / "eulerian" / "point_0001.json").read_text())
    assert document["dimensional"] is False
    assert len(document["x"]) == len(document["eta"])

    manifest = run.read_manifest()
    run.verify_outputs(manifest, manifest.outputs)


def test_repeated_runs_are_byte_identical(branch_run, tmp_path):
    config, first = branch_run
    second = tmp_path / "again"
    assert main(_continue_args(config, second)) == 0
    for key in ("curve.csv", "points/point_0001.csv", "points/point_0001.json"):
        assert (second / key).read_bytes() == (first / key).read_bytes()

    assert main(["diagnose", str(first), "--quiet"]) == 0
    assert main(["diagnose", str(second), "--quiet"]) == 0
    for key in ("diagnostics/point_0000.json", "diagnostics/branch_summary.csv"):
        assert (second / key).read_bytes() == (first / key).read_bytes()


def test_diagnose_empty_directory(tmp_path, capsys):
    assert main(["diagnose", str(tmp_path)]) == 2
    assert "Missing run artifact" in capsys.readouterr().err


def test_resume(tmp_path):
    config = tmp_path / "constant.toml"
    config.write_text(CONFIG)
    out = tmp_path / "run"
    args = ["continue", "--out", str(out), "--quiet"]
    first = ["--config", str(config), "--epsilon", "0.04", "--max-points", "1"]
    assert main(args + first) == 0
    assert main(args + ["--resume", "--max-points", "2"]) == 0
    assert RunDirectory(out).point_indices() == [0, 1]


def test_resume_refuses_modified_config(tmp_path, capsys):
    config = tmp_path / "constant.toml"
    config.write_text(CONFIG)
    out = tmp_path / "run"
    args = ["continue", "--out", str(out), "--quiet"]
    first = ["--config", str(config), "--epsilon", "0.04", "--max-points", "1"]
    assert main(args + first) == 0
    config.write_text(CONFIG.replace("value = 1.0", "value = 2.0"))
    assert main(args + ["--resume", "--max-points", "2"]) == 2
    assert "Digest mismatch" in capsys.readouterr().err


def test_resume_refuses_modified_point(tmp_path):
    config = tmp_path / "constant.toml"
    config.write_text(CONFIG)
    out = tmp_path / "run"
    args = ["continue", "--out", str(out), "--quiet"]
    first = ["--config", str(config), "--epsilon", "0.04", "--max-points", "1"]
    assert main(args + first) == 0
    point = out / "points" / "point_0000.json"
    point.write_text(point.read_text().replace('"s": 0.0', '"s": 1.0'))
    assert main(args + ["--resume", "--max-points", "2"]) == 2
