from __future__ import annotations

import csv

import numpy as np
import pytest

from memdetm.config import bundled_gains_path, scenario_from_dict
from memdetm.controller import MemoryGains, load_gains
from memdetm.errors import Divergence, MissingP
from memdetm.sim import (SimConfig, augmented_states, compare_mechanisms, consensus_error,
                         lyapunov_trace, run, write_trace)

from conftest import scalar_scenario


@pytest.fixture(scope="module")
def gains():
    return load_gains(bundled_gains_path("paper_s4")).gains


def test_deterministic(s4, gains):
    a = run(s4, gains, s4.detm_params(), SimConfig(horizon=60))
    b = run(s4, gains, s4.detm_params(), SimConfig(horizon=60))
    assert np.array_equal(a.states, b.states) and np.array_equal(a.triggered, b.triggered)


def test_shapes(s4, gains):
    tr = run(s4, gains, s4.detm_params(), SimConfig(horizon=30))
    assert tr.states.shape == (31, 4, 2) and tr.inputs.shape == (30, 4, 1)
    assert tr.triggered.shape == (30, 4) and tr.triggered[0].all()
    assert tr.consensus_error.shape == (31,)
    assert len(tr.trigger_events) == 4 and tr.trigger_events[0][0] == 0


def test_table_gains_decay(s4, gains):
    tr = run(s4, gains, s4.detm_params(), SimConfig(horizon=150))
    assert tr.consensus_error[-1] < tr.consensus_error[0]
    assert tr.max_norm[-1] < tr.max_norm[0]


def test_equilibrium_stays_put(s4):
    zero = [MemoryGains((np.zeros((1, 4)),) * 2, 2) for _ in range(4)]
    tr = run(s4, zero, s4.detm_params(), SimConfig(horizon=40, initial_states=np.zeros((4, 2))))
    assert not tr.states.any() and not tr.inputs.any()
    assert not tr.triggered[1:].any()
    assert np.allclose(tr.TRs, 1 / 40)


def test_alpha_zero_always_fires(s4, gains):
    ps = [p.replace(alpha=0.0) for p in s4.detm_params()]
    tr = run(s4, gains, ps, SimConfig(horizon=80))
    assert np.all(tr.TRs == 1.0)


def test_staleness_and_quiet_inequality(s4, gains):
    tr = run(s4, gains, s4.detm_params(), SimConfig(horizon=120))
    bc = tr.states[0].copy()
    for t in range(tr.horizon):
        fired = tr.triggered[t]
        bc[fired] = tr.states[t][fired]
        # the broadcast value is frozen between triggers
        assert np.allclose(tr.errors[t], bc - tr.states[t], atol=0)
        if t > 0:
            quiet = ~fired
            assert np.all(tr.lhs[t][quiet] < tr.rhs[t][quiet] + (tr.lhs[t][quiet] == 0))


def test_divergence_guard():
    sc = scalar_scenario(A=3.0, B=1.0)
    with pytest.raises(Divergence):
        run(sc, [MemoryGains((np.zeros((1, 1)),), 1)], sc.detm_params(), SimConfig(horizon=100, divergence=1e6))


def test_lyapunov_identity_weight(s4, gains):
    tr = run(s4, gains, s4.detm_params(), SimConfig(horizon=25))
    V, dV = lyapunov_trace(tr, np.eye(16))
    xa = augmented_states(tr)
    assert np.allclose(V, (xa ** 2).sum(1))
    assert np.allclose(dV, np.diff(V))
    assert np.allclose(xa[0], np.repeat(tr.states[0], 2, axis=0).reshape(-1))
    assert np.allclose(xa[3][:4], np.concatenate([tr.states[2][0], tr.states[3][0]]))


def test_lyapunov_equilibrium_and_missing(s4):
    zero = [MemoryGains((np.zeros((1, 4)),) * 2, 2) for _ in range(4)]
    tr = run(s4, zero, s4.detm_params(), SimConfig(horizon=5, initial_states=np.zeros((4, 2))))
    V, _ = lyapunov_trace(tr, np.eye(16))
    assert not V.any()
    with pytest.raises(MissingP):
        lyapunov_trace(tr, None)


def test_consensus_error_formula():
    s = np.array([[[0, 0], [3, 4], [1, 0]]], float)
    assert consensus_error(s)[0] == 5.0


def test_compare(s4, gains):
    rows = compare_mechanisms(s4, gains, [{"name": "dyn"}, {"name": "static", "beta": 0.0},
                                             {"name": "all", "alpha": 0.0},
                                             {"name": "mem", "H": "memoryless"}],
                              config=SimConfig(horizon=100))
    assert [r["variant"] for r in rows] == ["dyn", "static", "all", "mem"]
    assert rows[2]["TRs"] == [1.0] * 4
    assert all(r["stable"] for r in rows)


def test_write_trace(tmp_path, s4, gains):
    tr = run(s4, gains, s4.detm_params(), SimConfig(horizon=10, P=np.eye(16)))
    paths = write_trace(tr, tmp_path)
    with open(paths["triggers"]) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "agent", "triggered", "lhs", "rhs", "delta_threshold"]
    assert len(rows) == 1 + 10 * 4
    with open(paths["states"]) as fh:
        assert next(csv.reader(fh)) == ["t", "agent", "x1", "x2"]
    assert (tmp_path / "plot_trace.py").exists() and (tmp_path / "metrics.csv").exists()
    compile((tmp_path / "plot_trace.py").read_text(), "plot_trace.py", "exec")


def test_trigger_refresh_mode_freezes_measurement(s4, gains):
    tr = run(s4, gains, s4.detm_params(), SimConfig(horizon=60, refresh="trigger"))
    assert tr.meta["refresh"] == "trigger" and tr.max_norm[-1] < tr.max_norm[0]
