"""Solve the synthesis LMIs and recover memory gains."""
from __future__ import annotations

import logging

import numpy as np

from ..controller import MemoryGains
from ..errors import IllConditioned, Infeasible
from .backend import AffineLmi, get_backend
from .lmi import lift, vertex_affine_forms, xi_at
from .problem import SynthesisProblem, SynthesisResult, VariableLayout

log = logging.getLogger(__name__)

SIGMA_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
COND_LIMIT = 1e10


def _bound_constraints(layout: VariableLayout, eps: float) -> list:
    """P >= eps I, I - P >= 0 (scale normalization) and weight matrices >= eps I."""
    nv = layout.size
    out = []
    Pb = layout.block("P")
    mats = [B.reshape(Pb.shape) for B in Pb.basis]
    m = Pb.shape[0]
    out.append(AffineLmi.from_matrices(-eps * np.eye(m), mats, nv, Pb.start, name="P>=eps"))
    out.append(AffineLmi.from_matrices(np.eye(m), [-M for M in mats], nv, Pb.start, name="P<=I"))
    for blk in layout.blocks:
        if blk.name == "W":
            mats = [B.reshape(blk.shape) for B in blk.basis]
            out.append(AffineLmi.from_matrices(-eps * np.eye(blk.shape[0]), mats, nv, blk.start,
                                               name=f"W{blk.key[0]}>=eps"))
    return out


def build_program(problem: SynthesisProblem):
    """Layout, bound constraints and one margin constraint per vertex."""
    layout = VariableLayout(problem)
    lifted = lift(problem)
    bounds = _bound_constraints(layout, problem.epsilon)
    vertex_cons = {}
    for idx, F0, F in vertex_affine_forms(problem, layout, lifted=lifted):
        # Xi <= -t I  <=>  -Xi >= t I
        vertex_cons[idx] = AffineLmi(-F0, -F, margin=True, name=str(idx))
    return layout, bounds, vertex_cons, lifted


def recover_gains(X, Y, kappa: int) -> list:
    """K~ = X^{-1} Y for every agent and controller rule."""
    gains = []
    for i, (xs, ys) in enumerate(zip(X, Y)):
        stacked = []
        for s, (Xs, Ys) in enumerate(zip(xs, ys)):
            c = np.linalg.cond(Xs)
            if not np.isfinite(c) or c > COND_LIMIT:
                raise IllConditioned(f"X of agent {i} rule {s} has condition number {c:.3g}")
            stacked.append(np.linalg.solve(Xs, Ys))
        gains.append(MemoryGains(tuple(stacked), kappa))
    return gains


def _vertex_margins(vertex_cons, z) -> dict:
    """-lambda_max(Xi) at every vertex, from the affine forms."""
    return {idx: float(np.linalg.eigvalsh(c.evaluate(z)).min()) for idx, c in vertex_cons.items()}


def solve(problem: SynthesisProblem, backend=None, strategy: str = "active-set",
          max_rounds: int = 100, add_per_round: int = 8) -> SynthesisResult:
    """Search for a certificate with margin epsilon; raise Infeasible if none is found.

    ``strategy="full"`` hands every vertex to the backend at once.
    ``strategy="active-set"`` solves on a growing subset of vertices, adding the
    worst violated ones until the candidate satisfies all of them. Every subset
    problem is a relaxation, so an infeasible subset proves infeasibility.
    """
    backend = backend if backend is not None and not isinstance(backend, str) else get_backend(backend)
    layout, bounds, vcons, lifted = build_program(problem)
    eps = problem.epsilon
    order = list(vcons)
    active = order[:1] if strategy == "active-set" else order
    rounds = 0
    while True:
        rounds += 1
        log.info("round %d: %d of %d vertices, %d variables (sigma=%g)",
                 rounds, len(active), len(order), layout.size, problem.sigma)
        sol = backend.solve(layout.size, bounds + [vcons[v] for v in active])
        if sol.t < eps:
            raise Infeasible(f"no certificate at margin {eps:g} for sigma={problem.sigma:g}: "
                             f"{len(active)} of {len(order)} vertex LMIs already admit at most "
                             f"margin {sol.t:.3e}", sol.t)
        margins = _vertex_margins(vcons, sol.z)
        bad = sorted((m, v) for v, m in margins.items() if m < eps and v not in active)
        if not bad or strategy != "active-set":
            break
        if rounds >= max_rounds:
            raise Infeasible(f"active-set search did not settle in {max_rounds} rounds", min(margins.values()))
        active = active + [v for _, v in bad[:add_per_round]]
    vals = layout.unpack(sol.z)
    vmax = [float(np.linalg.eigvalsh(xi_at(problem, layout, sol.z, idx, lifted)).max())
            for idx in problem.vertices()]
    margin = -max(vmax)
    p_min = float(np.linalg.eigvalsh(vals["P"]).min())
    info = dict(sol.info, status=sol.status, t=sol.t, P_min_eig=p_min, rounds=rounds,
                active_vertices=len(active))
    # small slack on P because the solver meets P >= eps I only to its own tolerance
    if margin < eps or p_min < 0.9 * eps:
        raise Infeasible(f"no certificate at margin {eps:g} for sigma={problem.sigma:g} "
                         f"(best margin {margin:.3e}, min eig P {p_min:.3e})", margin)
    gains = recover_gains(vals["X"], vals["Y"], problem.kappa)
    return SynthesisResult(True, vals["P"], vals["W"], vals["X"], vals["Y"], gains, margin, vmax,
                           problem.sigma, eps, problem.omega_form, vals.get("Omega"), info)


def solve_with_sigma_grid(problem: SynthesisProblem, grid=SIGMA_GRID, backend=None,
                          **kw) -> SynthesisResult:
    """Try the problem's sigma first, then each grid value; return the first success."""
    tried = {}
    for sigma in [problem.sigma] + [s for s in grid if s != problem.sigma]:
        try:
            return solve(problem.with_(sigma=float(sigma)), backend, **kw)
        except Infeasible as exc:
            tried[sigma] = exc.margin
            log.info("sigma=%g infeasible (margin %s)", sigma, exc.margin)
    best = max(tried.values(), key=lambda v: -np.inf if v is None else v)
    detail = ", ".join(f"{s:g}: {m:.3e}" for s, m in tried.items() if m is not None)
    err = Infeasible(f"infeasible for every sigma tried ({detail})", best)
    err.tried = tried
    raise err
