"""Dynamic event-triggered mechanism with memory-weighted trigger test."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .topology import GraphMatrices

REFRESH_MODES = ("step", "trigger")


def geometric_H(nx: int, kappa: int) -> np.ndarray:
    """[H_kappa ... H_1] with H_h = 2**(1-h) I, so the newest block has weight one."""
    return np.hstack([2.0 ** (1 - h) * np.eye(nx) for h in range(kappa, 0, -1)])


def memoryless_H(nx: int, kappa: int) -> np.ndarray:
    """[0 ... 0 I]: only the newest error and measurement count."""
    H = np.zeros((nx, kappa * nx))
    H[:, (kappa - 1) * nx:] = np.eye(nx)
    return H


def make_H(spec, nx: int, kappa: int) -> np.ndarray:
    if spec is None or (isinstance(spec, str) and spec == "geometric"):
        return geometric_H(nx, kappa)
    if isinstance(spec, str):
        if spec == "memoryless":
            return memoryless_H(nx, kappa)
        raise ValueError(f"unknown H preset {spec!r}")
    return np.atleast_2d(np.asarray(spec, dtype=float))


@dataclass(frozen=True)
class DetmParams:
    """Trigger parameters of one agent.

    ``omega`` is either n_x x n_x, in which case the memory weight is H^T omega H,
    or kappa n_x x kappa n_x, in which case it is used as the memory weight
    directly (H is then only kept for reference).
    """

    alpha: float
    beta: float
    theta: float
    omega: np.ndarray
    H: np.ndarray
    kappa: int

    def __post_init__(self):
        om = np.atleast_2d(np.array(self.omega, dtype=float))
        H = np.atleast_2d(np.array(self.H, dtype=float))
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "H", H)
        if self.alpha < 0 or not 0 <= self.beta <= 1 or self.theta < 0:
            raise ValueError(f"need alpha >= 0, 0 <= beta <= 1, theta >= 0 "
                             f"(got {self.alpha}, {self.beta}, {self.theta})")
        nx = H.shape[0]
        if H.shape[1] != self.kappa * nx:
            raise DimensionMismatch(f"H has shape {H.shape}, expected ({nx}, {self.kappa * nx})")
        if om.shape not in ((nx, nx), (self.kappa * nx, self.kappa * nx)):
            raise DimensionMismatch(f"omega has shape {om.shape}")
        if not np.allclose(om, om.T) or np.linalg.eigvalsh((om + om.T) / 2).min() <= 0:
            raise ValueError("omega must be symmetric positive definite")
        blocks = np.split(H, self.kappa, axis=1)  # [H_kappa, ..., H_1]
        for older, newer in zip(blocks[:-1], blocks[1:]):
            if np.any(older > newer + 1e-15):
                raise ValueError("H blocks must not grow with age (H_{h+1} <= H_h elementwise)")

    @property
    def nx(self) -> int:
        return self.H.shape[0]

    @property
    def weight(self) -> np.ndarray:
        """Quadratic weight applied to the stacked error and measurement histories."""
        if self.omega.shape[0] == self.nx:
            return self.H.T @ self.omega @ self.H
        return self.omega

    def replace(self, **kw) -> "DetmParams":
        d = dict(alpha=self.alpha, beta=self.beta, theta=self.theta, omega=self.omega,
                 H=self.H, kappa=self.kappa)
        d.update(kw)
        return DetmParams(**d)


@dataclass
class DetmState:
    """Per-agent bookkeeping. Rings hold the last kappa committed values, oldest first."""

    last_broadcast: np.ndarray
    error: np.ndarray
    delta_history: deque
    error_history: deque
    trigger_log: list = field(default_factory=list)
    trigger_count: int = 0
    step_count: int = 0


@dataclass(frozen=True)
class TriggerDecision:
    triggered: bool
    lhs: float
    rhs: float
    threshold: float


def dynamic_threshold(params: DetmParams, e) -> float:
    e = np.asarray(e, dtype=float).reshape(-1)
    return params.alpha * (1.0 - params.beta * np.tanh(e @ e - params.theta))


def combined_measurement(graph: GraphMatrices, broadcasts, i: int) -> np.ndarray:
    """delta_i = sum_j a_ij (xh_i - xh_j) + b_i xh_i over broadcast values."""
    xh = np.asarray(broadcasts, dtype=float)
    row = graph.LR(i)[i]
    return row @ xh


def init_state(params: DetmParams, x0, delta0, t0: int = 0) -> DetmState:
    """State right after the initial broadcast, with both rings padded."""
    x0 = np.array(x0, dtype=float).reshape(-1)
    delta0 = np.array(delta0, dtype=float).reshape(-1)
    k = params.kappa
    return DetmState(x0.copy(), np.zeros_like(x0),
                     deque([delta0.copy() for _ in range(k)], maxlen=k),
                     deque([np.zeros_like(x0) for _ in range(k)], maxlen=k),
                     [t0], 1, 1)


def _stacks(params, state, e_now, delta_now):
    k = params.kappa
    errs = list(state.error_history)[1:] + [e_now]
    if delta_now is None:
        deltas = list(state.delta_history)
    else:
        deltas = list(state.delta_history)[1:] + [np.asarray(delta_now, dtype=float)]
    return np.concatenate(errs[-k:]), np.concatenate(deltas[-k:])


def evaluate_trigger(params: DetmParams, state: DetmState, x_now, delta_now=None) -> TriggerDecision:
    """Memory trigger test.

    ``delta_now`` is the candidate measurement built from the current broadcast
    snapshot; when omitted the stored history is used unchanged, which freezes the
    measurement between triggers.
    """
    e_now = state.last_broadcast - np.asarray(x_now, dtype=float)
    e_stack, d_stack = _stacks(params, state, e_now, delta_now)
    W = params.weight
    thr = dynamic_threshold(params, e_now)
    lhs = float(e_stack @ W @ e_stack)
    rhs = float(thr * (d_stack @ W @ d_stack))
    # a zero error carries no new information, so it never fires
    fired = bool(np.any(e_now != 0) and lhs >= rhs)
    return TriggerDecision(fired, lhs, rhs, float(thr))


def should_trigger(params: DetmParams, state: DetmState, x_now, delta_now=None) -> bool:
    return evaluate_trigger(params, state, x_now, delta_now).triggered


def commit(state: DetmState, x_now, triggered: bool, t: int) -> None:
    """Apply a trigger decision: broadcast if fired, then log the resulting error."""
    x_now = np.asarray(x_now, dtype=float)
    if triggered:
        state.last_broadcast = x_now.copy()
        state.trigger_log.append(t)
        state.trigger_count += 1
    state.error = state.last_broadcast - x_now
    state.error_history.append(state.error.copy())
    state.step_count += 1


def record_measurement(state: DetmState, delta, triggered: bool, refresh: str = "step") -> None:
    """Push a post-commit measurement into the ring according to the refresh mode."""
    if refresh not in REFRESH_MODES:
        raise ValueError(f"refresh must be one of {REFRESH_MODES}")
    if refresh == "step" or triggered:
        state.delta_history.append(np.array(delta, dtype=float))


def on_step(params: DetmParams, state: DetmState, x_now, broadcasts, graph: GraphMatrices,
            i: int, t: int, refresh: str = "step"):
    """Full single-agent update against a broadcast snapshot.

    Returns ``(triggered, state)``. The measurement pushed afterwards uses the
    snapshot with this agent's own entry refreshed.
    """
    snap = np.array(broadcasts, dtype=float)
    cand = combined_measurement(graph, snap, i) if refresh == "step" else None
    dec = evaluate_trigger(params, state, x_now, cand)
    commit(state, x_now, dec.triggered, t)
    snap[i] = state.last_broadcast
    record_measurement(state, combined_measurement(graph, snap, i), dec.triggered, refresh)
    return dec.triggered, state


def triggered_rate(state: DetmState) -> float:
    if state.step_count <= 0:
        raise ValueError("no steps recorded")
    return state.trigger_count / state.step_count
