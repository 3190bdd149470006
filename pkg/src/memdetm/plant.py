"""Agent dynamics, memory augmentation and the global block form."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, HeterogeneousDims
from .fuzzy import IT2MembershipFamily, normalized_membership


@dataclass(frozen=True)
class AgentModel:
    """Fuzzy rule set of one agent: ``rules`` is a list of (A, B) pairs."""

    rules: tuple
    plant_membership: IT2MembershipFamily
    controller_membership: IT2MembershipFamily | None = None

    def __post_init__(self):
        rules = tuple((np.atleast_2d(np.array(A, dtype=float)), np.atleast_2d(np.array(B, dtype=float)))
                      for A, B in self.rules)
        if not rules:
            raise DimensionMismatch("an agent needs at least one rule")
        nx = rules[0][0].shape[0]
        nu = rules[0][1].shape[1]
        for A, B in rules:
            if A.shape != (nx, nx) or B.shape != (nx, nu):
                raise DimensionMismatch(f"rule shapes A{A.shape}, B{B.shape} do not match n_x={nx}, n_u={nu}")
        if self.plant_membership.n_rules != len(rules):
            raise DimensionMismatch("plant membership rule count differs from the number of rules")
        object.__setattr__(self, "rules", rules)
        if self.controller_membership is None:
            object.__setattr__(self, "controller_membership", self.plant_membership)

    @property
    def nx(self) -> int:
        return self.rules[0][0].shape[0]

    @property
    def nu(self) -> int:
        return self.rules[0][1].shape[1]

    @property
    def p(self) -> int:
        return len(self.rules)

    @property
    def q(self) -> int:
        return self.controller_membership.n_rules


@dataclass(frozen=True)
class AugmentedModel:
    kappa: int
    A: tuple
    B: tuple

    @property
    def n(self) -> int:
        return self.A[0].shape[0]

    @property
    def nu(self) -> int:
        return self.B[0].shape[1]


@dataclass(frozen=True)
class GlobalBlocks:
    """Lifted blocks of one agent for one rule choice."""

    AA: np.ndarray
    BB: np.ndarray
    agent: int
    rule: int


def step_agent(model: AgentModel, x, u, w=None) -> np.ndarray:
    """One step of the blended model; memberships default to the plant family at ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if x.size != model.nx or u.size != model.nu:
        raise DimensionMismatch(f"x has {x.size} entries, u has {u.size}; expected {model.nx}, {model.nu}")
    if w is None:
        w = normalized_membership(model.plant_membership, x)
    out = np.zeros(model.nx)
    for wl, (A, B) in zip(w, model.rules):
        out += wl * (A @ x + B @ u)
    return out


def augment(model: AgentModel, kappa: int) -> AugmentedModel:
    """Shift-register form over the last ``kappa`` states, oldest block first."""
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    nx, nu = model.nx, model.nu
    n = kappa * nx
    As, Bs = [], []
    for A, B in model.rules:
        if kappa == 1:
            As.append(A.copy())
            Bs.append(B.copy())
            continue
        At = np.zeros((n, n))
        At[:n - nx, nx:] = np.eye(n - nx)
        At[n - nx:, n - nx:] = A
        Bt = np.zeros((n, nu))
        Bt[n - nx:] = B
        As.append(At)
        Bs.append(Bt)
    return AugmentedModel(kappa, tuple(As), tuple(Bs))


def check_uniform(models) -> tuple:
    """Return the shared (kappa, n, n_u) of augmented models or raise."""
    dims = {(m.kappa, m.n, m.nu) for m in models}
    if len(dims) != 1:
        raise HeterogeneousDims(f"agents disagree on (kappa, n, n_u): {sorted(dims)}")
    return dims.pop()


def assemble_global(models, rule_choice) -> list:
    """Lift each agent's chosen rule into the D-dimensional global state."""
    _, n, nu = check_uniform(models)
    N = len(models)
    if len(rule_choice) != N:
        raise DimensionMismatch("need one rule index per agent")
    D = N * n
    out = []
    for i, (m, l) in enumerate(zip(models, rule_choice)):
        AA = np.zeros((D, D))
        AA[i * n:(i + 1) * n, i * n:(i + 1) * n] = m.A[l]
        BB = np.zeros((D, N * nu))
        BB[i * n:(i + 1) * n, i * nu:(i + 1) * nu] = m.B[l]
        out.append(GlobalBlocks(AA, BB, i, l))
    return out


def closed_loop_matrix(blocks, graph, gains) -> tuple:
    """Global closed-loop pair (Lambda_A, Lambda_B) for fixed rule choices.

    ``gains`` holds one stacked gain K~ (n_u x kappa n_x) per agent, i.e. the
    controller rule has already been selected.
    """
    D = blocks[0].AA.shape[0]
    LA = np.zeros((D, D))
    LB = np.zeros((D, D))
    for i, blk in enumerate(blocks):
        K = np.atleast_2d(np.asarray(gains[i], dtype=float))
        nu = blk.BB.shape[1] // graph.N
        if K.shape[0] != nu or K.shape[1] * graph.N != D:
            raise DimensionMismatch(f"gain of agent {i} has shape {K.shape}")
        fb = blk.BB @ np.kron(graph.LR(i), K)
        LA += blk.AA + fb
        LB += fb
    return LA, LB


def vertex_closed_loop(augmented, graph, gains_by_rule, plant_rules, ctrl_rules) -> tuple:
    """Closed-loop pair at one vertex; ``gains_by_rule[i][s]`` is agent i's K~ for rule s."""
    blocks = assemble_global(augmented, plant_rules)
    return closed_loop_matrix(blocks, graph, [gains_by_rule[i][s] for i, s in enumerate(ctrl_rules)])
