from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from memdetm.detm import (DetmParams, combined_measurement, dynamic_threshold, evaluate_trigger,
                          geometric_H, init_state, make_H, memoryless_H, on_step, should_trigger,
                          triggered_rate)
from memdetm.topology import Topology, build_graph_matrices


def params(alpha=0.02, beta=0.5, theta=0.02, kappa=2, H="geometric", omega=None, nx=2):
    return DetmParams(alpha, beta, theta, np.eye(nx) if omega is None else omega,
                      make_H(H, nx, kappa), kappa)


def test_static_when_beta_zero():
    p = params(beta=0.0)
    assert dynamic_threshold(p, [3.0, -1.0]) == p.alpha


def test_threshold_at_pivot():
    p = params(theta=0.5)
    assert dynamic_threshold(p, [0.5, 0.5]) == pytest.approx(p.alpha, abs=0)


def test_threshold_scalar_value():
    want = 0.02 * (1 - 0.5 * math.tanh(0.98))
    assert dynamic_threshold(params(), [1.0, 0.0]) == pytest.approx(want, rel=1e-15)
    assert want == pytest.approx(0.012474, abs=1e-5)


@given(arrays(float, 2, elements=st.floats(-1e3, 1e3)), st.floats(0, 1), st.floats(0, 1), st.floats(0, 5))
def test_threshold_band(e, alpha, beta, theta):
    d = dynamic_threshold(params(alpha, beta, theta), e)
    assert alpha * (1 - beta) <= d <= alpha * (1 + beta)


@given(st.floats(0, 20), st.floats(1e-3, 20), st.floats(0.01, 1))
def test_threshold_decreasing(a, gap, beta):
    p = params(beta=beta, theta=1.0)
    lo = dynamic_threshold(p, [math.sqrt(a), 0])
    hi = dynamic_threshold(p, [math.sqrt(a + gap), 0])
    assert hi <= lo
    if math.tanh(a + gap - 1) - math.tanh(a - 1) > 1e-9:
        assert hi < lo


def test_measurement_consensus_null():
    g = build_graph_matrices(Topology([[0, 1], [1, 0]], [0, 0]))
    assert not combined_measurement(g, [[1.0, 2.0], [1.0, 2.0]], 0).any()


def test_measurement_ring(s4):
    bc = s4.initial_states
    assert np.array_equal(combined_measurement(s4.graph, bc, 0), [-2.0, -2.0])


def test_measurement_pinning_only():
    g = build_graph_matrices(Topology([[0, 0], [0, 0]], [1, 1]))
    assert np.array_equal(combined_measurement(g, [[0.3, 0.1], [5, 5]], 0), [0.3, 0.1])


def test_zero_error_never_fires():
    p = params()
    st_ = init_state(p, [1.0, 1.0], [1.0, 0.0])
    assert not should_trigger(p, st_, [1.0, 1.0])


def test_memoryless_scalar_cases():
    p = params(alpha=0.02, beta=0.0, H="memoryless")
    st_ = init_state(p, [0.0, 0.0], [1.0, 0.0])
    d = evaluate_trigger(p, st_, [-0.1, 0.0])
    assert not d.triggered and d.lhs == pytest.approx(0.01) and d.rhs == pytest.approx(0.02)
    assert should_trigger(p, st_, [-0.2, 0.0])


def test_alpha_zero_fires_on_any_error():
    p = params(alpha=0.0)
    st_ = init_state(p, [0.0, 0.0], [1.0, 1.0])
    assert should_trigger(p, st_, [1e-9, 0.0])


def test_tie_fires():
    p = params(alpha=0.25, beta=0.0, H="memoryless")
    st_ = init_state(p, [0.0, 0.0], [1.0, 0.0])
    d = evaluate_trigger(p, st_, [-0.5, 0.0])
    assert d.lhs == d.rhs and d.triggered


def test_memoryless_kappa1_matches_plain_rule():
    rng = np.random.default_rng(0)
    for _ in range(200):
        om = rng.standard_normal((2, 2))
        om = om @ om.T + 0.1 * np.eye(2)
        p = DetmParams(0.05, 0.5, 0.1, om, np.eye(2), 1)
        delta = rng.standard_normal(2)
        st_ = init_state(p, rng.standard_normal(2), delta)
        x = rng.standard_normal(2)
        e = st_.last_broadcast - x
        want = e @ om @ e >= dynamic_threshold(p, e) * delta @ om @ delta
        assert should_trigger(p, st_, x) == want


def test_on_step_bookkeeping(s4):
    ps = s4.detm_params()
    g = s4.graph
    x = s4.initial_states.copy()
    states = [init_state(ps[i], x[i], combined_measurement(g, x, i)) for i in range(4)]
    assert all(s.trigger_log == [0] and not s.error.any() for s in states)
    x_new = x.copy()
    x_new[0] += 1.0
    fired, s0 = on_step(ps[0], states[0], x_new[0], x, g, 0, 1)
    assert fired and s0.trigger_log == [0, 1] and not s0.error.any()
    assert np.array_equal(s0.last_broadcast, x_new[0])
    fired, s1 = on_step(ps[1], states[1], x[1], x, g, 1, 1)
    assert not fired and s1.step_count == 2 and s1.trigger_count == 1


def test_frozen_plant_stays_quiet():
    p = params()
    g = build_graph_matrices(Topology([[0]], [1]))
    x = np.array([0.5, -0.5])
    st_ = init_state(p, x, combined_measurement(g, [x], 0))
    for t in range(1, 50):
        fired, st_ = on_step(p, st_, x, [st_.last_broadcast], g, 0, t)
        assert not fired
    assert triggered_rate(st_) == 1 / 50


def test_triggered_rate_counts():
    p = params()
    st_ = init_state(p, [0, 0], [1, 1])
    st_.trigger_count, st_.step_count = 46, 100
    assert triggered_rate(st_) == 0.46


def test_H_presets():
    assert np.array_equal(geometric_H(2, 2), np.hstack([0.5 * np.eye(2), np.eye(2)]))
    assert np.array_equal(memoryless_H(1, 3), [[0, 0, 1]])
    assert np.array_equal(geometric_H(1, 3), [[0.25, 0.5, 1.0]])


def test_params_validation():
    with pytest.raises(ValueError):
        params(omega=np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        DetmParams(0.1, 0.5, 0.1, np.eye(1), np.array([[1.0, 0.5]]), 2)  # older block heavier
    with pytest.raises(ValueError):
        params(beta=1.5)


def test_expanded_weight_used_directly():
    W = np.diag([1.0, 2.0, 3.0, 4.0])
    p = params(omega=W)
    assert np.array_equal(p.weight, W)
    q = params()
    H = geometric_H(2, 2)
    assert np.array_equal(q.weight, H.T @ H)
