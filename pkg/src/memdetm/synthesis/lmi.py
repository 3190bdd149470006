"""Numeric assembly of the vertex LMIs and of the closed-loop certificate matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import DimensionMismatch
from ..plant import assemble_global, vertex_closed_loop
from .problem import SynthesisProblem, VariableLayout


def _T(a):
    return np.swapaxes(a, -1, -2)


def bkron(C, Yb):
    """kron(C, Y) for a constant C and a batch of matrices Y (b, r, s)."""
    b, r, s = Yb.shape
    p, q = C.shape
    return np.einsum("pq,brs->bprqs", C, Yb).reshape(b, p * r, q * s)


def bblkdiag(mats):
    """Block diagonal of batched matrices that share the batch size."""
    b = mats[0].shape[0]
    rows = sum(m.shape[1] for m in mats)
    cols = sum(m.shape[2] for m in mats)
    out = np.zeros((b, rows, cols))
    r = c = 0
    for m in mats:
        out[:, r:r + m.shape[1], c:c + m.shape[2]] = m
        r += m.shape[1]
        c += m.shape[2]
    return out


@dataclass
class _Lifted:
    AA: list
    BB: list
    BK: list
    LRi: list
    LRn: np.ndarray


def lift(problem: SynthesisProblem) -> _Lifted:
    """Per-agent, per-rule lifted blocks reused across every vertex."""
    pr = problem
    g = pr.graph
    AA, BB, BK = [], [], []
    for i, m in enumerate(pr.models):
        rows_A, rows_B, rows_K = [], [], []
        for l in range(len(m.A)):
            choice = [0] * pr.N
            choice[i] = l
            blk = assemble_global(pr.models, choice)[i]
            rows_A.append(blk.AA)
            rows_B.append(blk.BB)
            rows_K.append(blk.BB @ np.kron(g.LR(i), np.eye(pr.nu)))
        AA.append(rows_A)
        BB.append(rows_B)
        BK.append(rows_K)
    return _Lifted(AA, BB, BK, [g.LR(i) for i in range(pr.N)], np.kron(g.LR(), np.eye(pr.n)))


def assemble_vertex_lmi(problem: SynthesisProblem, values: dict, multi_index, lifted=None) -> np.ndarray:
    """Xi at one vertex for batched variable values (leading batch axis).

    ``values`` is what VariableLayout.batch returns. The result has shape
    (b, 3D + N^2 n_u, 3D + N^2 n_u).
    """
    pr = problem
    lf = lifted or lift(pr)
    ls, ss = multi_index
    if len(ls) != pr.N or len(ss) != pr.N:
        raise DimensionMismatch("multi-index needs one plant and one controller rule per agent")
    sig = pr.sigma
    P = values["P"]
    W = values["W"]
    X = [values["X"][i][ss[i]] for i in range(pr.N)]
    Y = [values["Y"][i][ss[i]] for i in range(pr.N)]
    IN = np.eye(pr.N)

    Ups = bblkdiag(W)
    Gam = bblkdiag([pr.alpha[i] * (1 + pr.beta[i]) * W[i] for i in range(pr.N)])
    LE = lf.LRn.T @ Gam @ lf.LRn
    LE = (LE + _T(LE)) / 2
    Xi1 = sum(lf.BB[i][ls[i]] @ bkron(lf.LRi[i], Y[i]) for i in range(pr.N))
    Xi5 = P @ sum(lf.AA[i][ls[i]] for i in range(pr.N)) + Xi1
    Xi2 = np.concatenate([_T(P @ lf.BK[i][ls[i]] - lf.BB[i][ls[i]] @ bkron(lf.LRi[i], X[i]))
                          for i in range(pr.N)], axis=1)
    Xi3 = bblkdiag([bkron(IN, X[i]) for i in range(pr.N)])
    Xi4 = np.concatenate([bkron(IN, Y[i]) for i in range(pr.N)], axis=1)

    D, M = pr.D, pr.M
    shapes = {"LE": LE.shape[1:], "Xi1": Xi1.shape[1:], "Xi2": Xi2.shape[1:],
              "Xi3": Xi3.shape[1:], "Xi4": Xi4.shape[1:]}
    want = {"LE": (D, D), "Xi1": (D, D), "Xi2": (M, D), "Xi3": (M, M), "Xi4": (M, D)}
    if shapes != want:
        raise DimensionMismatch(f"block shapes {shapes} differ from {want}")

    r1 = np.concatenate([-P + LE, _T(LE), _T(Xi5), sig * _T(Xi4)], axis=2)
    r2 = np.concatenate([LE, LE - Ups, _T(Xi1), sig * _T(Xi4)], axis=2)
    r3 = np.concatenate([Xi5, Xi1, -P, _T(Xi2)], axis=2)
    r4 = np.concatenate([sig * Xi4, sig * Xi4, Xi2, -sig * (Xi3 + _T(Xi3))], axis=2)
    return np.concatenate([r1, r2, r3, r4], axis=1)


def xi_at(problem, layout: VariableLayout, z, multi_index, lifted=None) -> np.ndarray:
    """Xi for a single flat assignment z."""
    return assemble_vertex_lmi(problem, layout.batch(np.asarray(z)[None, :]), multi_index, lifted)[0]


def svec_index(m: int):
    """Column-major lower-triangle indices and the sqrt(2) off-diagonal scaling."""
    cols, rows = np.triu_indices(m)
    scale = np.where(rows == cols, 1.0, np.sqrt(2.0))
    return rows, cols, scale


def vertex_affine_forms(problem, layout: VariableLayout, chunk: int = 512, lifted=None):
    """Yield (multi_index, F0, F) with Xi(z) = F0 + sum_k z_k F_k.

    F is a sparse (svec length, n_vars) matrix in the column-major lower-triangle
    svec convention. The affine map is recovered exactly by probing unit
    directions, in chunks to bound memory.
    """
    lf = lifted or lift(problem)
    nv = layout.size
    m = problem.size
    rows, cols, scale = svec_index(m)
    zero = layout.batch(np.zeros((1, nv)))
    probes = [(k0, min(k0 + chunk, nv)) for k0 in range(0, nv, chunk)]
    probe_vals = [layout.batch(np.eye(nv)[k0:k1]) for k0, k1 in probes]
    for idx in problem.vertices():
        F0 = assemble_vertex_lmi(problem, zero, idx, lf)[0]
        parts = []
        for vals in probe_vals:
            Fb = assemble_vertex_lmi(problem, vals, idx, lf) - F0
            parts.append(sp.csc_matrix((Fb[:, rows, cols] * scale).T))
        yield idx, F0, sp.hstack(parts).tocsc()


def theta_matrix(problem, LA, LB, P, W) -> np.ndarray:
    """Certificate matrix of the closed loop for one vertex.

    Negative definiteness of this matrix is the condition the Lyapunov
    difference argument needs; it is checked directly with the recovered gains.
    """
    pr = problem
    Gam = np.zeros((pr.D, pr.D))
    Ups = np.zeros((pr.D, pr.D))
    for i in range(pr.N):
        sl = slice(i * pr.n, (i + 1) * pr.n)
        Ups[sl, sl] = W[i]
        Gam[sl, sl] = pr.alpha[i] * (1 + pr.beta[i]) * W[i]
    LRn = np.kron(pr.graph.LR(), np.eye(pr.n))
    LE = LRn.T @ Gam @ LRn
    LE = (LE + LE.T) / 2
    t11 = -P + LA.T @ P @ LA + LE
    t21 = LB.T @ P @ LA + LE
    t22 = LB.T @ P @ LB + LE - Ups
    T = np.block([[t11, t21.T], [t21, t22]])
    return (T + T.T) / 2


def vertex_thetas(problem, gains_by_rule, P, W):
    """Yield (multi_index, Theta) for every vertex with the given stacked gains."""
    for idx in problem.vertices():
        LA, LB = vertex_closed_loop(problem.models, problem.graph, gains_by_rule, *idx)
        yield idx, theta_matrix(problem, LA, LB, P, W)
