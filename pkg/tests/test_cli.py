import json
from pathlib import Path

import pytest

from gnekit.cli import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, main

SCEN = Path(__file__).resolve().parents[1] / "scenarios"


def test_solve_builtin_example1(capsys):
    assert main(["solve", "example1", "--alpha", "0.5"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    best = doc["candidates"][0]
    assert best["x"][0] == pytest.approx(0.75, abs=1e-6)
    assert best["x"][1] == pytest.approx(0.25, abs=1e-6)
    assert best["kkt_residual"] <= 1e-7


def test_solve_scenario_file(capsys, tmp_path):
    out = tmp_path / "run"
    assert main(["solve", str(SCEN / "harker.toml"), "--alpha", "1.0",
                 "--out", str(out)]) == EXIT_OK
    doc = json.loads((out / "solution.json").read_text())
    assert any(abs(c["x"][0] - 5.0) < 1e-6 and abs(c["x"][1] - 9.0) < 1e-6
               for c in doc["candidates"])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "solve"
    assert len(manifest["hash"]) == 16


def test_solve_requires_alpha(capsys):
    assert main(["solve", "example1"]) == EXIT_INPUT
    assert "alpha" in capsys.readouterr().err


def test_missing_scenario_file(capsys):
    assert main(["solve", "does-not-exist.toml"]) == EXIT_INPUT
    assert "no such file" in capsys.readouterr().err


def test_bad_subcommand_is_input_error():
    assert main(["frobnicate", "example1"]) == EXIT_INPUT


def test_sweep_csv_output(tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "example1", "--grid", "0.2:0.8:0.2",
                 "--out", str(out)]) == EXIT_OK
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("# manifest_hash=")
    assert lines[1].startswith("# seed=")
    assert lines[2].startswith("alpha,")
    assert len(lines) == 3 + 4


def test_sweep_manifest_hash_deterministic(tmp_path):
    outs = []
    for d in ("a", "b"):
        out = tmp_path / d
        assert main(["sweep", "example1", "--grid", "0.2:0.8:0.2",
                     "--out", str(out)]) == EXIT_OK
        outs.append((out / "sweep.csv").read_text())
    assert outs[0] == outs[1]


def test_bad_grid_spec(capsys):
    assert main(["sweep", "example1", "--grid", "oops"]) == EXIT_INPUT
    assert "--grid" in capsys.readouterr().err


def test_select_outputs(tmp_path):
    out = tmp_path / "sel"
    assert main(["select", "example1", "--out", str(out)]) == EXIT_OK
    doc = json.loads((out / "selection.json").read_text())
    assert doc["params"][0] == pytest.approx(0.5, abs=1e-3)
    assert not doc["boundary"]
    assert (out / "trace.csv").exists()


def test_oracle_commands(capsys):
    assert main(["oracle", "example1", "--alpha", "0.5"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["x"] == pytest.approx(0.75)
    assert main(["oracle", "harker", "--alpha", "3.0"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    labels = {c["label"] for c in doc["candidates"]}
    assert labels == {"interior", "active"}
    assert main(["oracle", "unknown", "--alpha", "1.0"]) == EXIT_INPUT


def test_race_smoke(tmp_path, capsys):
    out = tmp_path / "race"
    code = main(["race", str(SCEN / "race.toml"), "--out", str(out)])
    assert code == EXIT_OK
    doc = json.loads((out / "race.json").read_text())
    assert doc["degraded_steps"] == 0
    traj = (out / "trajectories.csv").read_text().splitlines()
    assert traj[0].startswith("# manifest_hash=")


def test_mc_smoke(tmp_path):
    out = tmp_path / "mc"
    code = main(["mc", str(SCEN / "race.toml"), "--runs", "1",
                 "--seed", "3", "--out", str(out)])
    assert code == EXIT_OK
    doc = json.loads((out / "summary.json").read_text())
    assert doc["n_runs"] == 1
    assert (out / "verdicts.csv").exists()
