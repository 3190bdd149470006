from __future__ import annotations

import numpy as np
import pytest

from memdetm.config import load_scenario, scenario_from_dict


def scalar_scenario(A=0.5, B=1.0, kappa=1, alpha=0.02, beta=0.5, theta=0.1, x0=1.0):
    """Single pinned scalar agent with one crisp rule."""
    return scenario_from_dict({
        "name": "scalar", "kappa": kappa, "initial_states": [[x0]],
        "topology": {"adjacency": [[0]], "pinning": [1]},
        "agents": [{"rules": [{"A": [[A]], "B": [[B]]}],
                    "membership": {"type": "crisp", "n_rules": 1},
                    "detm": {"alpha": alpha, "beta": beta, "theta": theta}}],
    })


def random_scenario_doc(rng, N=None, kappa=None, nx=None, nu=1, p=2, alpha=0.02, stable=False):
    N = N or int(rng.integers(1, 4))
    kappa = kappa or int(rng.integers(1, 3))
    nx = nx or int(rng.integers(1, 3))
    adj = (rng.random((N, N)) < 0.6).astype(float) * rng.uniform(0.2, 1.5, (N, N))
    np.fill_diagonal(adj, 0.0)
    pin = rng.uniform(0.0, 1.5, N)
    pin[rng.integers(N)] = 1.0
    agents = []
    for _ in range(N):
        rules = []
        for _ in range(p):
            A = rng.standard_normal((nx, nx)) * (0.3 if stable else 0.7)
            rules.append({"A": A.tolist(), "B": rng.standard_normal((nx, nu)).tolist()})
        agents.append({"rules": rules,
                       "membership": {"type": "sigmoid_band", "axis": int(rng.integers(nx)),
                                      "shift": float(rng.normal()), "band": 0.1},
                       "detm": {"alpha": alpha, "beta": 0.5, "theta": 0.1}})
    return {"name": "random", "kappa": kappa, "agents": agents,
            "topology": {"adjacency": adj.tolist(), "pinning": pin.tolist()},
            "initial_states": rng.uniform(-2, 2, (N, nx)).tolist()}


@pytest.fixture(scope="session")
def s4():
    return load_scenario("paper_s4")
