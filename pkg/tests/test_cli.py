from __future__ import annotations

import json

import numpy as np
import yaml

from memdetm.cli import main

from conftest import scalar_scenario

SMALL = {
    "name": "pair", "kappa": 2, "initial_states": [[1.0], [-0.5]],
    "topology": {"adjacency": [[0, 1], [1, 0]], "pinning": [1, 0]},
    "agents": [{"rules": [{"A": [[0.9]], "B": [[1.0]]}, {"A": [[1.05]], "B": [[0.8]]}],
                "membership": {"type": "sigmoid_band"},
                "detm": {"alpha": 0.01, "beta": 0.5, "theta": 0.1}}] * 2,
    "synthesis": {"sigma": 1.0},
}


def test_unknown_subcommand(capsys):
    assert main(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err


def test_no_subcommand():
    assert main([]) == 2


def test_simulate_table_gains(tmp_path):
    assert main(["simulate", "--scenario", "paper_s4", "--gains", "paper_s4", "--horizon", "50",
                 "--out", str(tmp_path)]) == 0
    for f in ("states.csv", "inputs.csv", "triggers.csv", "metrics.csv", "plot_trace.py"):
        assert (tmp_path / f).exists()


def test_config_error_exit(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("kappa: [")
    assert main(["simulate", str(bad), "--gains", "paper_s4"]) == 2
    assert main(["simulate", "paper_s4", "--gains", str(tmp_path / "missing.json")]) == 2


def test_synth_simulate_verify_round(tmp_path):
    scen = tmp_path / "pair.yaml"
    scen.write_text(yaml.safe_dump(SMALL))
    out = tmp_path / "out"
    assert main(["synth", str(scen), "--out", str(out), "--backend", "cvxopt"]) == 0
    rep = json.loads((out / "synth_report.json").read_text())
    assert rep["feasible"] and rep["margin"] >= 1e-6 and rep["verify"]["ok"]
    assert main(["simulate", str(scen), "--gains", str(out / "gains"), "--out", str(out)]) == 0
    assert main(["verify", str(scen), "--gains", str(out / "gains.json"), "--out", str(out)]) == 0
    doc = json.loads((out / "gains.json").read_text())
    doc["agents"][0]["rules"][0]["K"]["1"][0][0] += 10.0
    (out / "tampered.json").write_text(json.dumps(doc))
    assert main(["verify", str(scen), "--gains", str(out / "tampered.json"), "--out", str(out)]) == 1
    assert main(["compare", str(scen), "--gains", str(out / "gains.json"), "--out", str(out),
                 "--horizon", "40"]) == 0
    assert (out / "compare.csv").exists()


def test_synth_infeasible_exit(tmp_path):
    doc = {"name": "stuck", "kappa": 1, "initial_states": [[1.0]],
           "topology": {"adjacency": [[0]], "pinning": [1]},
           "agents": [{"rules": [{"A": [[2.0]], "B": [[0.0]]}], "membership": {"type": "crisp", "n_rules": 1},
                       "detm": {"alpha": 0.02, "beta": 0.5, "theta": 0.1}}]}
    scen = tmp_path / "stuck.yaml"
    scen.write_text(yaml.safe_dump(doc))
    assert main(["synth", str(scen), "--out", str(tmp_path), "--no-grid"]) == 1
    assert not json.loads((tmp_path / "synth_report.json").read_text())["feasible"]
