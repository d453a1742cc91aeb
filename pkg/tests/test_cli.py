import json
import subprocess
import sys

import pytest

from cmjlab import __version__
from cmjlab.cli import EXIT_CAP, EXIT_ERROR, EXIT_OK, EXIT_REGIME, RunConfig, main
from cmjlab.coupling_lab import FamilyTree


def run(tmp_path, *args):
    return main([*args, "--outdir", str(tmp_path)])


def data_lines(path):
    return [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]


def test_solve_ok_and_embeds_config(tmp_path):
    assert run(tmp_path, "solve", "--b", "0.1", "--c", "0.1", "--p", "0.5", "--k", "2") == EXIT_OK
    doc = json.loads((tmp_path / "solve.json").read_text())
    assert doc["result"]["beta"] < doc["result"]["alpha"]
    assert doc["config"]["b"] == 0.1 and doc["seed"] == 0 and doc["tool_version"] == __version__
    assert not list(tmp_path.glob("*.partial"))


def test_solve_regime_gate(tmp_path):
    assert run(tmp_path, "solve", "--b", "1000", "--c", "1", "--p", "0") == EXIT_REGIME
    doc = json.loads((tmp_path / "solve.json").read_text())
    assert doc["result"]["alpha"] is None
    assert doc["result"]["regime"]["alpha_status"] == "not_supercritical"


def test_validation_names_field(tmp_path, capsys):
    assert run(tmp_path, "solve", "--b", "-1", "--c", "1", "--p", "0.5") == EXIT_ERROR
    assert "b" in capsys.readouterr().err
    assert run(tmp_path, "moments", "--b", "0.1", "--c", "0.1", "--p", "0.5", "--k", "0.5") == EXIT_ERROR
    assert "k" in capsys.readouterr().err
    assert run(tmp_path, "solve", "--b", "0.1", "--c", "0.1", "--p", "2") == EXIT_ERROR


def in_dir(monkeypatch, path, *args):
    # without --outdir the echoed config is independent of where files land
    path.mkdir(parents=True, exist_ok=True)
    monkeypatch.chdir(path)
    return main(list(args))


def test_simulate_first_row_and_determinism(tmp_path, monkeypatch):
    args = ["simulate", "--b", "0.1", "--c", "0.1", "--p", "0.5", "--replicas", "2", "--horizon", "3"]
    assert in_dir(monkeypatch, tmp_path / "a", *args) == EXIT_OK
    assert in_dir(monkeypatch, tmp_path / "b", *args, "--threads", "4") == EXIT_OK
    lines = data_lines(tmp_path / "a" / "simulate_r0000.csv")
    assert lines[0].startswith("t,vertices,")
    assert lines[1].startswith("0.0,2,1,1,1,1")
    for name in ("simulate_r0000.csv", "simulate_r0001.csv", "simulate_status.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_aggregate_columns(tmp_path):
    args = ["simulate", "--b", "0.1", "--c", "0.1", "--p", "0.5", "--replicas", "100",
            "--horizon", "2", "--aggregate"]
    assert run(tmp_path, *args) == EXIT_OK
    header = data_lines(tmp_path / "simulate.csv")[0].split(",")
    assert "vertices_mean" in header and "vertices_se" in header


def test_relabel_hand_example_and_idempotence(tmp_path):
    tree = FamilyTree({(1,): 0.0, (1, 1): 0.0, (1, 2): 1.0})
    src = tmp_path / "tree.json"
    src.write_text(tree.to_json())
    assert run(tmp_path, "relabel", "--input", str(src), "--name", "once") == EXIT_OK
    once = FamilyTree.from_json((tmp_path / "once.json").read_text())
    assert once.births == {(1,): 0.0, (2,): 0.0, (1, 1): 1.0}
    assert run(tmp_path, "relabel", "--input", str(tmp_path / "once.json"), "--name", "twice") == EXIT_OK
    twice = json.loads((tmp_path / "twice.json").read_text())
    assert FamilyTree.from_json(json.dumps(twice)) == once and twice["steps"] == 0


def test_relabel_cap_hit_and_malformed(tmp_path, capsys):
    src = tmp_path / "deep.json"
    src.write_text(FamilyTree({(1,): 0.0, (1, 1): 1.0, (1, 1, 1): 1.0}).to_json())
    assert run(tmp_path, "relabel", "--input", str(src), "--depth-cap", "2") == EXIT_CAP
    doc = json.loads((tmp_path / "relabel.json").read_text())
    assert doc["cap_hit"] is True
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps([{"label": [1], "birth_time": 0.0}, {"label": [1, 2], "birth_time": 1.0}]))
    assert run(tmp_path, "relabel", "--input", str(bad)) == EXIT_ERROR
    assert "(1, 2)" in capsys.readouterr().err


def test_maxdeg_gates(tmp_path, capsys):
    assert run(tmp_path, "maxdeg", "--b", "1", "--c", "1", "--p", "0.5") == EXIT_REGIME
    assert run(tmp_path, "maxdeg", "--b", "0.1", "--c", "0.1", "--p", "0.5", "--k", "2") == EXIT_REGIME
    assert "alpha/beta" in capsys.readouterr().err


def test_config_precedence_and_round_trip(tmp_path, monkeypatch):
    cfg = RunConfig(subcommand="solve", b=0.5, c=0.1, p=1.0, seed=9)
    assert RunConfig.from_json(cfg.to_json()) == cfg
    path = tmp_path / "cfg.json"
    path.write_text(cfg.to_json())
    assert in_dir(monkeypatch, tmp_path, "solve", "--config", str(path), "--c", "0.2") == EXIT_OK
    doc = json.loads((tmp_path / "solve.json").read_text())
    assert (doc["config"]["b"], doc["config"]["c"], doc["config"]["seed"]) == (0.5, 0.2, 9)
    # the echoed config reproduces the run exactly
    echo = tmp_path / "echo.json"
    echo.write_text(json.dumps({"config": doc["config"]}))
    assert in_dir(monkeypatch, tmp_path / "again", "solve", "--config", str(echo)) == EXIT_OK
    assert (tmp_path / "again" / "solve.json").read_bytes() == (tmp_path / "solve.json").read_bytes()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"bogus": 1}))
    assert run(tmp_path, "solve", "--config", str(bad)) == EXIT_ERROR


def test_outdir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CMJLAB_OUTDIR", str(tmp_path / "env"))
    assert main(["solve", "--b", "0.1", "--c", "0.1", "--p", "0.5"]) == EXIT_OK
    assert (tmp_path / "env" / "solve.json").exists()


def test_moments_k1_csv(tmp_path):
    args = ["moments", "--b", "0.1", "--c", "0.1", "--p", "0.5", "--k", "1", "--replicas", "100",
            "--t-stop", "2", "--t-points", "5"]
    assert run(tmp_path, *args) == EXIT_OK
    doc = json.loads((tmp_path / "moments.json").read_text())
    assert "tail_slope" in doc["result"]
    rows = data_lines(tmp_path / "moments.csv")
    assert rows[0] == "t,estimate,se" and rows[1].startswith("0.0,1.0,0.0")


@pytest.mark.parametrize("argv", [["--version"], ["solve", "--help"]])
def test_module_entry_point(argv):
    proc = subprocess.run([sys.executable, "-m", "cmjlab", *argv], capture_output=True, text=True)
    assert proc.returncode == 0
