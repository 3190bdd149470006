"""Solver-free checks of synthesis output, plus a fixed-gain certificate search."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import Infeasible, VerificationFailed
from .backend import AffineLmi, get_backend
from .lmi import lift, svec_index, theta_matrix, vertex_thetas, xi_at
from .problem import SynthesisProblem, VariableLayout
from .solve import _bound_constraints
from ..plant import vertex_closed_loop


@dataclass
class VerifyReport:
    ok: bool
    theta_max_eig: dict
    xi_max_eig: dict = field(default_factory=dict)
    P_min_eig: float = float("nan")
    recovery_residual: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def worst_theta(self) -> tuple:
        idx = max(self.theta_max_eig, key=self.theta_max_eig.get)
        return idx, self.theta_max_eig[idx]

    def summary(self) -> dict:
        idx, val = self.worst_theta
        out = {"ok": self.ok, "vertices": len(self.theta_max_eig), "worst_theta_vertex": [list(idx[0]), list(idx[1])],
               "worst_theta_max_eig": val, "P_min_eig": self.P_min_eig,
               "recovery_residual": self.recovery_residual, "failures": self.failures}
        if self.xi_max_eig:
            out["worst_xi_max_eig"] = max(self.xi_max_eig.values())
        return out


def verify(result, problem: SynthesisProblem, raise_on_fail: bool = True) -> VerifyReport:
    """Recheck a certificate by eigenvalues only.

    Builds the closed-loop certificate matrix with the stored gains at every
    vertex, and when X, Y are available also rechecks Xi <= -eps I and the gain
    recovery X K~ = Y.
    """
    P = np.asarray(result.P)
    W = [np.asarray(w) for w in result.W]
    failures = []
    p_min = float(np.linalg.eigvalsh((P + P.T) / 2).min())
    if p_min <= 0:
        failures.append(("P not positive definite", None, p_min))
    gains_by_rule = [g.stacked for g in result.gains]
    theta = {}
    for idx, T in vertex_thetas(problem, gains_by_rule, P, W):
        theta[idx] = float(np.linalg.eigvalsh(T).max())
        if not theta[idx] < 0:
            failures.append(("theta", idx, theta[idx]))
    xi = {}
    resid = 0.0
    X = getattr(result, "X", None)
    Y = getattr(result, "Y", None)
    if X is not None and Y is not None:
        for i, g in enumerate(result.gains):
            for s, K in enumerate(g.stacked):
                r = np.linalg.norm(X[i][s] @ K - Y[i][s]) / max(np.linalg.norm(Y[i][s]), 1e-300)
                resid = max(resid, float(r))
        if resid > 1e-8:
            failures.append(("gain recovery", None, resid))
        layout = VariableLayout(problem.with_(sigma=result.sigma))
        pr = problem.with_(sigma=result.sigma)
        vals = {"P": P, "W": W, "X": X, "Y": Y}
        if problem.omega_form == "projected":
            vals["Omega"] = result.Omega
        z = layout.pack(vals)
        lifted = lift(pr)
        eps = getattr(result, "epsilon", problem.epsilon)
        for idx in pr.vertices():
            xi[idx] = float(np.linalg.eigvalsh(xi_at(pr, layout, z, idx, lifted)).max())
            if xi[idx] > -eps:
                failures.append(("xi", idx, xi[idx]))
    rep = VerifyReport(not failures, theta, xi, p_min, resid, failures)
    if failures and raise_on_fail:
        kind, idx, val = failures[0]
        raise VerificationFailed(f"{kind} check failed at vertex {idx} (value {val:.3e})", idx, val)
    return rep


@dataclass
class GainCertificate:
    P: np.ndarray
    W: list
    Omega: list | None
    margin: float
    theta_max_eig: dict


def certify_gains(problem: SynthesisProblem, gains, backend=None) -> GainCertificate:
    """Search for P and trigger weights making every vertex certificate negative definite.

    The gains are fixed, so the certificate is linear in the remaining variables
    and the search is a plain LMI feasibility problem.
    """
    backend = backend if backend is not None and not isinstance(backend, str) else get_backend(backend)
    layout = VariableLayout(problem, controller=False)
    nv = layout.size
    gains_by_rule = [g.stacked for g in gains]
    units = layout.batch(np.vstack([np.zeros(nv), np.eye(nv)]))
    cons = _bound_constraints(layout, problem.epsilon)
    m = 2 * problem.D
    rows, cols, scale = svec_index(m)
    for idx in problem.vertices():
        LA, LB = vertex_closed_loop(problem.models, problem.graph, gains_by_rule, *idx)
        Tb = np.array([theta_matrix(problem, LA, LB, units["P"][k], [w[k] for w in units["W"]])
                       for k in range(nv + 1)])
        F0 = Tb[0]
        F = sp.csc_matrix(((Tb[1:] - F0)[:, rows, cols] * scale).T)
        cons.append(AffineLmi(-F0, -F, margin=True, name=str(idx)))
    sol = backend.solve(nv, cons)
    vals = layout.unpack(sol.z)
    theta = {}
    for idx, T in vertex_thetas(problem, gains_by_rule, vals["P"], vals["W"]):
        theta[idx] = float(np.linalg.eigvalsh(T).max())
    margin = -max(theta.values())
    if margin < problem.epsilon or np.linalg.eigvalsh(vals["P"]).min() <= 0:
        raise Infeasible(f"gains admit no certificate at margin {problem.epsilon:g} "
                         f"(best {margin:.3e})", margin)
    return GainCertificate(vals["P"], vals["W"], vals.get("Omega"), margin, theta)


def averaging_slack(seed=0, draws=1000, max_dim=4, n_agents=2, n_rules=2, psi_zero=False,
                 mode="random") -> float:
    """Smallest eigenvalue of rhs - sym(lhs) over random instances of the averaging bound.

    ``mode`` is "random" (independent L_v, R_v), "equal" (L_v = R_v) or
    "identical" (one matrix for every vertex and side, the equality case).

    For vertex weights h_v (products of per-agent simplex weights), Psi >= 0 and
    matrices L_v, R_v, checks

        sym((sum h_v L_v)^T Psi (sum h_v R_v)) <= 1/2 sum h_v (L_v^T Psi L_v + R_v^T Psi R_v).
    """
    import itertools
    rng = np.random.default_rng(seed)
    worst = np.inf
    verts = list(itertools.product(range(n_rules), repeat=2 * n_agents))
    for _ in range(draws):
        r = int(rng.integers(1, max_dim + 1))
        c = int(rng.integers(1, max_dim + 1))
        G = rng.standard_normal((r, r))
        Psi = np.zeros((r, r)) if psi_zero else G @ G.T * rng.uniform(0, 3)
        mem = [rng.dirichlet(np.ones(n_rules)) for _ in range(2 * n_agents)]
        h = np.array([np.prod([mem[a][v[a]] for a in range(2 * n_agents)]) for v in verts])
        Ls = rng.standard_normal((len(verts), r, c)) * rng.uniform(0.1, 5)
        if mode == "identical":
            Ls[:] = Ls[0]
        Rs = Ls.copy() if mode in ("equal", "identical") else \
            rng.standard_normal((len(verts), r, c)) * rng.uniform(0.1, 5)
        Lw = np.tensordot(h, Ls, 1)
        Rw = np.tensordot(h, Rs, 1)
        lhs = Lw.T @ Psi @ Rw
        lhs = (lhs + lhs.T) / 2
        rhs = 0.5 * sum(hv * (L.T @ Psi @ L + R.T @ Psi @ R) for hv, L, R in zip(h, Ls, Rs))
        worst = min(worst, float(np.linalg.eigvalsh(rhs - lhs).min()))
    return worst


def check_averaging_bound(seed=0, draws=1000, max_dim=4, n_agents=2, n_rules=2, tol=1e-9) -> bool:
    return averaging_slack(seed, draws, max_dim, n_agents, n_rules) >= -tol
