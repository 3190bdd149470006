"""Closed-loop simulation, Lyapunov traces, mechanism comparison and CSV export."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .controller import MemoryGains, control_input, stack_history
from .detm import (DetmParams, commit, combined_measurement, dynamic_threshold, evaluate_trigger,
                   init_state, make_H, record_measurement, triggered_rate)
from .errors import DimensionMismatch, Divergence, MissingP
from .fuzzy import normalized_membership
from .plant import step_agent


@dataclass
class SimConfig:
    horizon: int = 100
    initial_states: np.ndarray | None = None
    refresh: str = "step"
    divergence: float = 1e12
    settle: float = 1e-2
    P: np.ndarray | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


@dataclass
class SimTrace:
    """Recorded run. ``states`` has T+1 rows (initial state included), the rest T rows."""

    states: np.ndarray
    inputs: np.ndarray
    errors: np.ndarray
    triggered: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    threshold: np.ndarray
    TRs: np.ndarray
    consensus_error: np.ndarray
    kappa: int
    V: np.ndarray | None = None
    dV: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.inputs.shape[0]

    @property
    def trigger_events(self) -> list:
        return [np.flatnonzero(self.triggered[:, i]).tolist() for i in range(self.triggered.shape[1])]

    @property
    def max_norm(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=2).max(axis=1)

    def settling_step(self, threshold=1e-2):
        hit = np.flatnonzero(self.max_norm < threshold)
        return int(hit[0]) if hit.size else None


def consensus_error(states) -> np.ndarray:
    """max_ij ||x_i - x_j|| for every time row of a (T, N, n_x) array."""
    s = np.asarray(states)
    diff = s[:, :, None, :] - s[:, None, :, :]
    return np.linalg.norm(diff, axis=3).max(axis=(1, 2))


def run(scenario, gains, detm_params, config: SimConfig | None = None) -> SimTrace:
    """Simulate the event-triggered closed loop.

    Each step: trigger decisions on the previous broadcast snapshot, commit of all
    broadcasts, measurement refresh, control, plant update. Every agent broadcasts
    at t = 0.
    """
    cfg = config or SimConfig(horizon=scenario.horizon, refresh=scenario.refresh,
                              divergence=scenario.divergence, settle=scenario.settle)
    models = scenario.models
    graph = scenario.graph
    N = len(models)
    nx, nu = models[0].nx, models[0].nu
    kappa = detm_params[0].kappa
    if len(gains) != N or len(detm_params) != N:
        raise DimensionMismatch("need one gain set and one parameter set per agent")
    for i, (g, m, p) in enumerate(zip(gains, models, detm_params)):
        if g.kappa != kappa or p.kappa != kappa or g.nx != nx or g.nu != nu or g.q != m.q:
            raise DimensionMismatch(f"agent {i}: gains/parameters do not match the model")
    x0 = scenario.initial_states if cfg.initial_states is None else cfg.initial_states
    x = np.array(x0, dtype=float).reshape(N, nx)
    T = cfg.horizon

    states = np.zeros((T + 1, N, nx))
    inputs = np.zeros((T, N, nu))
    errors = np.zeros((T, N, nx))
    trig = np.zeros((T, N), dtype=bool)
    lhs = np.full((T, N), np.nan)
    rhs = np.full((T, N), np.nan)
    thr = np.zeros((T, N))
    states[0] = x

    bcast = x.copy()
    ds = [init_state(detm_params[i], x[i], combined_measurement(graph, bcast, i)) for i in range(N)]
    trig[0] = True
    thr[0] = [dynamic_threshold(detm_params[i], np.zeros(nx)) for i in range(N)]

    for t in range(T):
        if t > 0:
            snap = bcast.copy()
            decs = []
            for i in range(N):
                cand = combined_measurement(graph, snap, i) if cfg.refresh == "step" else None
                decs.append(evaluate_trigger(detm_params[i], ds[i], x[i], cand))
            for i, dec in enumerate(decs):
                commit(ds[i], x[i], dec.triggered, t)
                bcast[i] = ds[i].last_broadcast
                trig[t, i] = dec.triggered
                lhs[t, i], rhs[t, i], thr[t, i] = dec.lhs, dec.rhs, dec.threshold
            for i, dec in enumerate(decs):
                record_measurement(ds[i], combined_measurement(graph, bcast, i), dec.triggered, cfg.refresh)
        x_next = np.empty_like(x)
        for i, m in enumerate(models):
            errors[t, i] = ds[i].error
            w = normalized_membership(m.controller_membership, x[i])
            u = control_input(gains[i], w, stack_history(ds[i].delta_history))
            inputs[t, i] = u
            x_next[i] = step_agent(m, x[i], u)
        if not np.all(np.isfinite(x_next)) or np.abs(x_next).max() > cfg.divergence:
            raise Divergence(f"state left the {cfg.divergence:g} box at step {t + 1}")
        x = x_next
        states[t + 1] = x

    TRs = np.array([triggered_rate(s) for s in ds])
    tr = SimTrace(states, inputs, errors, trig, lhs, rhs, thr, TRs, consensus_error(states), kappa,
                  meta={"refresh": cfg.refresh})
    if cfg.P is not None:
        tr.V, tr.dV = lyapunov_trace(tr, cfg.P)
    return tr


def augmented_states(trace: SimTrace) -> np.ndarray:
    """Global augmented state for every recorded time, padding the past with x(0)."""
    s = trace.states
    k = trace.kappa
    T1, N, nx = s.shape
    padded = np.concatenate([np.repeat(s[:1], k - 1, axis=0), s], axis=0)
    out = np.zeros((T1, N * k * nx))
    for t in range(T1):
        win = padded[t:t + k]  # oldest first
        out[t] = np.concatenate([win[:, i, :].reshape(-1) for i in range(N)])
    return out


def lyapunov_trace(trace: SimTrace, P) -> tuple:
    """V(t) = x~(t)^T P x~(t) and its forward difference."""
    if P is None:
        raise MissingP("a Lyapunov matrix is required")
    P = np.asarray(P, dtype=float)
    xa = augmented_states(trace)
    if P.shape != (xa.shape[1], xa.shape[1]):
        raise DimensionMismatch(f"P has shape {P.shape}, augmented state has {xa.shape[1]} entries")
    V = np.einsum("ti,ij,tj->t", xa, P, xa)
    return V, np.diff(V)


def _variant_params(base, variant, nx, kappa):
    if isinstance(variant, (list, tuple)) and variant and isinstance(variant[0], DetmParams):
        return list(variant), "custom"
    v = dict(variant)
    name = v.pop("name", ",".join(f"{k}={v[k]}" for k in sorted(v)))
    out = []
    for p in base:
        kw = {}
        for key in ("alpha", "beta", "theta"):
            if key in v:
                kw[key] = float(v[key])
        if "H" in v:
            kw["H"] = make_H(v["H"], nx, kappa)
        out.append(p.replace(**kw))
    return out, name


def compare_mechanisms(scenario, gains, variants, base_params=None, config: SimConfig | None = None) -> list:
    """Run one simulation per variant and tabulate communication and convergence."""
    base = base_params or scenario.detm_params()
    cfg = config or SimConfig(horizon=scenario.horizon, refresh=scenario.refresh,
                              divergence=scenario.divergence, settle=scenario.settle)
    rows = []
    for variant in variants:
        params, name = _variant_params(base, variant, scenario.nx, scenario.kappa)
        row = {"variant": name}
        try:
            tr = run(scenario, gains, params, cfg)
        except Divergence:
            row.update(TRs=None, mean_TRs=None, settling_step=None, consensus_error=None,
                       max_norm=None, stable=False)
        else:
            row.update(TRs=tr.TRs.tolist(), mean_TRs=float(tr.TRs.mean()),
                       settling_step=tr.settling_step(cfg.settle),
                       consensus_error=float(tr.consensus_error[-1]),
                       max_norm=float(tr.max_norm[-1]),
                       stable=bool(tr.max_norm[-1] < tr.max_norm[0]))
        rows.append(row)
    return rows


PLOT_SCRIPT = '''"""Render state, input, trigger and consensus plots from the CSV files next to this script."""
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent


def read(name):
    with open(here / name) as fh:
        return list(csv.DictReader(fh))


states = read("states.csv")
inputs = read("inputs.csv")
trig = read("triggers.csv")
metrics = read("metrics.csv")
agents = sorted({int(r["agent"]) for r in states})
comps = [k for k in states[0] if k.startswith("x")]

fig, axes = plt.subplots(len(comps), 1, figsize=(7, 3 * len(comps)), sharex=True)
axes = axes if len(comps) > 1 else [axes]
for ax, c in zip(axes, comps):
    for a in agents:
        rows = [r for r in states if int(r["agent"]) == a]
        ax.plot([int(r["t"]) for r in rows], [float(r[c]) for r in rows], label=f"agent {a + 1}")
    ax.set_ylabel(c)
    ax.legend()
axes[-1].set_xlabel("t")
fig.tight_layout()
fig.savefig(here / "states.png", dpi=120)

fig, ax = plt.subplots(figsize=(7, 3))
for a in agents:
    rows = [r for r in inputs if int(r["agent"]) == a]
    ax.step([int(r["t"]) for r in rows], [float(r["u1"]) for r in rows], where="post", label=f"agent {a + 1}")
ax.set_xlabel("t")
ax.set_ylabel("u")
ax.legend()
fig.tight_layout()
fig.savefig(here / "inputs.png", dpi=120)

fig, ax = plt.subplots(figsize=(7, 3))
for a in agents:
    ts = [int(r["t"]) for r in trig if int(r["agent"]) == a and r["triggered"] == "1"]
    ax.stem(ts, [a + 1] * len(ts), basefmt=" ")
ax.set_xlabel("t")
ax.set_ylabel("agent")
ax.set_title("broadcast instants")
fig.tight_layout()
fig.savefig(here / "triggers.png", dpi=120)

fig, ax = plt.subplots(figsize=(7, 3))
ax.semilogy([int(r["t"]) for r in metrics], [max(float(r["consensus_error"]), 1e-16) for r in metrics])
ax.set_xlabel("t")
ax.set_ylabel("consensus error")
fig.tight_layout()
fig.savefig(here / "consensus.png", dpi=120)
'''


def write_trace(trace: SimTrace, out_dir) -> dict:
    """Write states/inputs/triggers/metrics CSVs, a summary and the plot script."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    T1, N, nx = trace.states.shape
    nu = trace.inputs.shape[2]
    paths = {}
    with open(out / "states.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "agent"] + [f"x{k + 1}" for k in range(nx)])
        for t in range(T1):
            for i in range(N):
                w.writerow([t, i] + [repr(float(v)) for v in trace.states[t, i]])
    paths["states"] = out / "states.csv"
    with open(out / "inputs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "agent"] + [f"u{k + 1}" for k in range(nu)])
        for t in range(trace.horizon):
            for i in range(N):
                w.writerow([t, i] + [repr(float(v)) for v in trace.inputs[t, i]])
    paths["inputs"] = out / "inputs.csv"
    with open(out / "triggers.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "agent", "triggered", "lhs", "rhs", "delta_threshold"])
        for t in range(trace.horizon):
            for i in range(N):
                w.writerow([t, i, int(trace.triggered[t, i]), repr(float(trace.lhs[t, i])),
                            repr(float(trace.rhs[t, i])), repr(float(trace.threshold[t, i]))])
    paths["triggers"] = out / "triggers.csv"
    with open(out / "metrics.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "consensus_error", "max_norm", "V"])
        mn = trace.max_norm
        for t in range(T1):
            v = "" if trace.V is None else repr(float(trace.V[t]))
            w.writerow([t, repr(float(trace.consensus_error[t])), repr(float(mn[t])), v])
    paths["metrics"] = out / "metrics.csv"
    summary = {"horizon": trace.horizon, "TRs": trace.TRs.tolist(), "mean_TRs": float(trace.TRs.mean()),
               "final_max_norm": float(trace.max_norm[-1]),
               "final_consensus_error": float(trace.consensus_error[-1]),
               "settling_step": trace.settling_step(), **trace.meta}
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    paths["summary"] = out / "summary.json"
    (out / "plot_trace.py").write_text(PLOT_SCRIPT)
    paths["plot"] = out / "plot_trace.py"
    return paths
