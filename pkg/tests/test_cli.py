from __future__ import annotations

import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from approachability import SolverError, cli
from approachability.cli import main
from approachability.instances import constant_reward, controlled_chain, repeated_game

ORTHANT = {"type": "box", "lower": [None, None], "upper": [0.0, 0.0]}


def write_config(tmp_path, model, name="cfg.json", **extra):
    doc = {**model.to_dict(), "target": ORTHANT, **extra}
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_solve_direction_mode(tmp_path, capsys):
    cfg = write_config(tmp_path, repeated_game())
    assert main(["solve", "--config", cfg, "--point=-1,-1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["margin"] is None
    assert out["strategy"] == [[1.0, 0.0]]
    assert out["value"] == pytest.approx(math.sqrt(2))


def test_solve_separation(tmp_path, capsys):
    cfg = write_config(tmp_path, repeated_game())
    assert main(["solve", "--config", cfg, "--point", "1,1", "--target-from-config"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "ok"
    assert out["margin"] == pytest.approx(2.0, abs=1e-9)
    assert out["projection"] == [0.0, 0.0]
    assert out["strategy"] == [[1.0, 0.0]]


def test_solve_violation_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, constant_reward())
    assert main(["solve", "--config", cfg, "--point", "2,2", "--target-from-config"]) == 3
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "assumption_violated"
    assert out["margin"] == pytest.approx(-4.0, abs=1e-9)


def test_solve_rejects_inside_point_and_bad_dimension(tmp_path):
    cfg = write_config(tmp_path, repeated_game())
    assert main(["solve", "--config", cfg, "--point=-1,-1", "--target-from-config"]) == 2
    assert main(["solve", "--config", cfg, "--point", "1,1,1"]) == 2
    assert main(["solve", "--config", cfg, "--point", "a,b"]) == 2


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, repeated_game())

    def broken(*args, **kwargs):
        raise SolverError("no convergence", residual=1.0)

    monkeypatch.setattr(cli, "solve_average_game", broken)
    assert main(["solve", "--config", cfg, "--point", "1,1"]) == 4


def test_simulate_writes_files(tmp_path, capsys):
    cfg = write_config(tmp_path, controlled_chain(), adversary={"kind": "best-response"})
    out = tmp_path / "run"
    code = main(["simulate", "--config", cfg, "--steps", "5000", "--seeds", "2", "--out", str(out)])
    assert code == 0
    assert (out / "trace_seed0.csv").exists() and (out / "trace_seed1.csv").exists()
    rows = read_csv(out / "summary.csv")
    assert [r["seed"] for r in rows] == ["0", "1", "median"]
    assert all(r["config_id"] == "cfg" for r in rows)
    assert rows[0]["status"] == "ok"
    assert capsys.readouterr().out == (out / "summary.csv").read_text()
    decay = read_csv(out / "decay.csv")
    assert len(decay) == 2


def test_simulate_is_reproducible(tmp_path):
    cfg = write_config(tmp_path, controlled_chain(), adversary={"kind": "uniform-random"})
    texts = []
    for name in ("a", "b"):
        main(["simulate", "--config", cfg, "--steps", "3000", "--seed", "9", "--out", str(tmp_path / name)])
        texts.append(((tmp_path / name / "trace_seed0.csv").read_bytes(),
                      (tmp_path / name / "summary.csv").read_bytes()))
    assert texts[0] == texts[1]


def test_simulate_adversary_override(tmp_path):
    cfg = write_config(tmp_path, repeated_game(), adversary={"kind": "best-response"})
    code = main(["simulate", "--config", cfg, "--steps", "2000", "--out", str(tmp_path / "o"),
                 "--adversary", '{"kind": "fixed", "strategy": [[0.0, 1.0]]}', "--stride", "1"])
    assert code == 0
    rows = read_csv(tmp_path / "o" / "trace_seed0.csv")
    assert {r["u_a"] for r in rows} == {"1"}
    assert main(["simulate", "--config", cfg, "--steps", "10", "--out", str(tmp_path / "p"),
                 "--adversary", "wizard"]) == 2


def test_simulate_violation(tmp_path):
    cfg = write_config(tmp_path, constant_reward(), adversary={"kind": "uniform-random"})
    out = tmp_path / "neg"
    with pytest.warns(UserWarning):
        assert main(["simulate", "--config", cfg, "--steps", "1000", "--out", str(out)]) == 3
    row = read_csv(out / "summary.csv")[0]
    assert row["status"] == "assumption_violated"
    assert float(row["dist_final"]) == pytest.approx(math.sqrt(2))


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(bogus=1),
        lambda d: d.update(target={"type": "cube"}),
        lambda d: d.update(controller={"beta": 2.0}),
        lambda d: d.update(adversary={"kind": "fixed"}),
        lambda d: d.pop("kernel"),
        lambda d: d.update(initial_state=7),
    ],
)
def test_bad_config_exit_code(tmp_path, mutate):
    doc = {**repeated_game().to_dict(), "target": ORTHANT}
    mutate(doc)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["simulate", "--config", str(path), "--steps", "10", "--out", str(tmp_path / "o")]) == 2


def test_missing_and_malformed_files(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.json"), "--point", "1,1"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", "--config", str(bad), "--point", "1,1"]) == 2


def test_nonpositive_counts_rejected(tmp_path):
    cfg = write_config(tmp_path, repeated_game(), adversary={"kind": "best-response"})
    assert main(["simulate", "--config", cfg, "--steps", "0", "--out", str(tmp_path / "o")]) == 2


def test_check_assumption(tmp_path, capsys):
    cfg = write_config(tmp_path, controlled_chain())
    grid = tmp_path / "grid.json"
    pts = [[a, b] for a in np.linspace(-2, 2, 5) for b in np.linspace(-2, 2, 5)]
    grid.write_text(json.dumps({"points": pts}))
    assert main(["check-assumption", "--config", cfg, "--grid-points", str(grid)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["ergodicity"]["status"] == "PASS" and out["ergodicity"]["horizon"] == 1
    assert out["violations"] == 0 and out["min_margin"] > 0
    assert len(out["points"]) == 25
    inside = [p for p in out["points"] if p["status"] == "inside"]
    assert all(max(p["point"]) <= 0 for p in inside)


def test_check_assumption_violation(tmp_path, capsys):
    cfg = write_config(tmp_path, constant_reward())
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps([[2.0, 2.0], [-1.0, -1.0]]))
    assert main(["check-assumption", "--config", cfg, "--grid-points", str(grid)]) == 3
    out = json.loads(capsys.readouterr().out)
    assert out["violations"] == 1
    assert [p["status"] for p in out["points"]] == ["assumption_violated", "inside"]


def test_check_assumption_bad_grid(tmp_path):
    cfg = write_config(tmp_path, controlled_chain())
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps([[1.0, 2.0, 3.0]]))
    assert main(["check-assumption", "--config", cfg, "--grid-points", str(grid)]) == 2


def test_experiment_suite(tmp_path, capsys):
    write_config(tmp_path, repeated_game(), name="game.json", adversary={"kind": "best-response"})
    suite = {
        "root_seed": 3,
        "seeds": 2,
        "configs": [
            {"config_id": "file", "config": "game.json", "steps": 3000},
            {"config_id": "inline", "steps": 2000, "adversary": {"kind": "uniform-random"},
             "config": {**controlled_chain().to_dict(), "target": ORTHANT}},
        ],
    }
    path = tmp_path / "suite.json"
    path.write_text(json.dumps(suite))
    out = tmp_path / "res" / "summary.csv"
    assert main(["experiment", "--suite", str(path), "--out", str(out)]) == 0
    rows = read_csv(out)
    assert [(r["config_id"], r["seed"]) for r in rows] == [
        ("file", "0"), ("file", "1"), ("file", "median"),
        ("inline", "0"), ("inline", "1"), ("inline", "median"),
    ]
    assert rows[0]["steps"] == "3000" and rows[3]["steps"] == "2000"
    assert (tmp_path / "res" / "summary_decay.csv").exists()
    capsys.readouterr()
    # the seed override and a rerun give the same leading rows
    again = tmp_path / "again.csv"
    assert main(["experiment", "--suite", str(path), "--out", str(again), "--seeds", "1"]) == 0
    assert read_csv(again)[0] == rows[0]


def test_experiment_bad_suite(tmp_path):
    path = tmp_path / "suite.json"
    path.write_text(json.dumps({"seeds": 1, "configs": [], "extra": True}))
    assert main(["experiment", "--suite", str(path), "--out", str(tmp_path / "s.csv")]) == 2


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path, constant_reward())
    proc = subprocess.run(
        [sys.executable, "-m", "approachability", "solve", "--config", cfg, "--point", "2,2",
         "--target-from-config"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 3
    assert json.loads(proc.stdout)["status"] == "assumption_violated"
