from __future__ import annotations

import copy

import numpy as np
import pytest
import yaml

from memdetm.config import dump_scenario, load_scenario, scenario_from_dict
from memdetm.detm import geometric_H
from memdetm.errors import ParseError, ValidationError


def test_bundled_values(s4):
    assert s4.N == 4 and s4.kappa == 2
    assert [d["alpha"] for d in s4.detm] == [0.02, 0.03, 0.02, 0.03]
    assert [d["beta"] for d in s4.detm] == [0.5] * 4
    assert [d["theta"] for d in s4.detm] == [0.02, 0.3, 0.02, 0.3]
    assert s4.initial_states.tolist() == [[1, 1], [2, 2], [3, 3], [4, 4]]
    assert s4.topology.b.tolist() == [1, 1, 1, 1]
    A = [[r[0].tolist() for r in m.rules] for m in s4.models]
    assert A[1] == [[[1.0, 0.01], [0.5, 1.0]], [[1.0, 0.01], [0.55, 1.0]]]
    assert A[3][1] == [[1.0, 0.01], [0.45, 1.0]]
    assert s4.models[1].rules[1][1].ravel().tolist() == [0.1, 0.5]


def test_default_H_geometric(s4):
    assert np.array_equal(s4.H(0), geometric_H(2, 2))
    doc = copy.deepcopy(s4.doc)
    doc.pop("detm_defaults")
    for ag in doc["agents"]:
        ag["detm"]["beta"] = 0.5
    sc = scenario_from_dict(doc)
    assert np.array_equal(sc.detm_params()[0].H, geometric_H(2, 2))


def test_bad_shape(s4):
    doc = copy.deepcopy(s4.doc)
    doc["agents"][0]["rules"][0]["A"] = [[1, 0], [0, 1], [1, 1]]
    with pytest.raises(ValidationError, match=r"agents\[0\].rules\[0\].A"):
        scenario_from_dict(doc)


def test_missing_field(s4):
    doc = copy.deepcopy(s4.doc)
    del doc["topology"]["pinning"]
    with pytest.raises(ValidationError, match="pinning"):
        scenario_from_dict(doc)


def test_parse_error_has_line(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("kappa: 2\nagents: [\n  - x\n")
    with pytest.raises(ParseError, match="line"):
        load_scenario(p)


def test_missing_file(tmp_path):
    with pytest.raises(ParseError):
        load_scenario(tmp_path / "nope.yaml")


def test_round_trip(tmp_path, s4):
    path = dump_scenario(s4, tmp_path / "s.yaml")
    again = load_scenario(path)
    assert again.to_dict() == yaml.safe_load(yaml.safe_dump(s4.to_dict()))
    assert again.N == s4.N and again.horizon == s4.horizon
    for a, b in zip(again.models, s4.models):
        for (A1, B1), (A2, B2) in zip(a.rules, b.rules):
            assert np.array_equal(A1, A2) and np.array_equal(B1, B2)
    assert np.array_equal(again.topology.a, s4.topology.a)
