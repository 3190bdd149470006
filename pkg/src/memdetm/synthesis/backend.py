"""Conic backends for margin-maximizing LMI feasibility problems.

A program is a list of affine symmetric constraints

    F0 + sum_k z_k F_k  >=  t I   (margin=True)
    F0 + sum_k z_k F_k  >=  0     (margin=False)

and the backend maximizes the scalar t subject to t <= t_max.
"""
from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import BackendFailure
from .lmi import svec_index

ENV_BACKEND = "MEMDETM_LMI_BACKEND"


@dataclass
class AffineLmi:
    """One constraint; F is sparse (svec(m), n_vars) in the column-major svec convention."""

    F0: np.ndarray
    F: sp.spmatrix
    margin: bool = True
    name: str = ""

    @property
    def m(self) -> int:
        return self.F0.shape[0]

    @classmethod
    def from_matrices(cls, F0, mats, n_vars, offset=0, margin=False, name=""):
        """Build from dense basis matrices ``mats[k]`` acting on z[offset + k]."""
        F0 = np.asarray(F0, dtype=float)
        m = F0.shape[0]
        rows, cols, scale = svec_index(m)
        data = np.array([M[rows, cols] * scale for M in mats]).T
        F = sp.lil_matrix((rows.size, n_vars))
        F[:, offset:offset + len(mats)] = data
        return cls(F0, F.tocsc(), margin, name)

    def evaluate(self, z) -> np.ndarray:
        m = self.m
        rows, cols, scale = svec_index(m)
        v = self.F @ np.asarray(z) / scale
        S = np.zeros((m, m))
        S[rows, cols] = v
        S = S + np.tril(S, -1).T
        return self.F0 + S


@dataclass
class LmiSolution:
    z: np.ndarray
    t: float
    status: str
    info: dict = field(default_factory=dict)


class _Backend:
    """Shared handling: variables that no constraint touches are fixed at zero."""

    def solve(self, n_vars, constraints, t_max=1.0) -> LmiSolution:
        used = np.zeros(n_vars, dtype=bool)
        for c in constraints:
            used[np.unique(c.F.tocoo().col)] = True
        keep = np.flatnonzero(used)
        if keep.size < n_vars:
            constraints = [AffineLmi(c.F0, c.F.tocsc()[:, keep], c.margin, c.name) for c in constraints]
        sol = self._solve(keep.size, constraints, t_max)
        z = np.zeros(n_vars)
        z[keep] = sol.z
        sol.z = z
        return sol


class ScsBackend(_Backend):
    """First-order splitting solver; cheap per iteration, handles many blocks."""

    name = "scs"

    def __init__(self, eps=1e-7, max_iters=20000, time_limit=None, verbose=False):
        self.eps = eps
        self.max_iters = max_iters
        self.time_limit = time_limit
        self.verbose = verbose

    def _solve(self, n_vars, constraints, t_max=1.0) -> LmiSolution:
        import scs

        A_parts = [sp.csc_matrix(np.r_[np.zeros(n_vars), 1.0][None, :])]
        b_parts = [np.array([t_max])]
        sizes = []
        for c in constraints:
            rows, cols, scale = svec_index(c.m)
            tcol = np.where(rows == cols, 1.0, 0.0) if c.margin else np.zeros(rows.size)
            # s = b - A x  with s = svec(F0 + F z - t I)
            A_parts.append(sp.hstack([-c.F, sp.csc_matrix(tcol[:, None])]).tocsc())
            b_parts.append(c.F0[rows, cols] * scale)
            sizes.append(c.m)
        A = sp.vstack(A_parts).tocsc()
        b = np.concatenate(b_parts)
        cvec = np.zeros(n_vars + 1)
        cvec[-1] = -1.0
        settings = dict(eps_abs=self.eps, eps_rel=self.eps, max_iters=self.max_iters,
                        verbose=self.verbose)
        if self.time_limit:
            settings["time_limit_secs"] = float(self.time_limit)
        t0 = time.time()
        try:
            solver = scs.SCS(dict(A=A, b=b, c=cvec), dict(l=1, s=sizes), **settings)
            sol = solver.solve()
        except Exception as exc:  # solver-level crash
            raise BackendFailure(f"SCS failed: {exc}") from exc
        status = sol["info"]["status"]
        x = sol["x"]
        usable = status == "solved" or "inaccurate" in status
        if x is None or not np.all(np.isfinite(x)) or not usable:
            raise BackendFailure(f"SCS status {status!r}")
        return LmiSolution(x[:-1], float(x[-1]), status,
                           dict(backend=self.name, iterations=int(sol["info"]["iter"]),
                                seconds=time.time() - t0))


class CvxoptBackend(_Backend):
    """Primal-dual interior point; accurate, best for small and medium problems."""

    name = "cvxopt"

    def __init__(self, max_iters=100, verbose=False, tol=1e-9):
        self.max_iters = max_iters
        self.verbose = verbose
        self.tol = tol

    def _solve(self, n_vars, constraints, t_max=1.0) -> LmiSolution:
        from cvxopt import matrix, solvers, spmatrix

        def to_sp(S):
            S = S.tocoo()
            return spmatrix(S.data.tolist(), S.row.tolist(), S.col.tolist(), S.shape)

        Gs, hs = [], []
        for c in constraints:
            m = c.m
            rows, cols, scale = svec_index(m)
            F = (c.F.tocsc().multiply(1.0 / scale[:, None])).tocoo()
            # cvxopt reads the lower triangle of the column-major vec(m x m)
            lin = cols[F.row] * m + rows[F.row]
            G = sp.coo_matrix((-F.data, (lin, F.col)), shape=(m * m, n_vars + 1)).tocsc()
            if c.margin:
                diag = np.arange(m) * (m + 1)
                G = G + sp.coo_matrix((np.ones(m), (diag, np.full(m, n_vars))), shape=G.shape)
            Gs.append(to_sp(G))
            hs.append(matrix(np.asarray(c.F0, dtype=float)))
        cvec = np.zeros(n_vars + 1)
        cvec[-1] = -1.0
        Gl = spmatrix([1.0], [0], [n_vars], (1, n_vars + 1))
        hl = matrix([float(t_max)])
        opts = dict(show_progress=self.verbose, maxiters=self.max_iters,
                    abstol=self.tol, reltol=self.tol, feastol=self.tol)
        t0 = time.time()
        try:
            sol = solvers.sdp(matrix(cvec), Gl=Gl, hl=hl, Gs=Gs, hs=hs, options=opts)
        except (ArithmeticError, ValueError) as exc:
            raise BackendFailure(f"cvxopt failed: {exc}") from exc
        if sol["x"] is None:
            raise BackendFailure(f"cvxopt status {sol['status']!r}")
        x = np.array(sol["x"]).reshape(-1)
        return LmiSolution(x[:-1], float(x[-1]), sol["status"],
                           dict(backend=self.name, iterations=int(sol.get("iterations", -1)),
                                seconds=time.time() - t0))


BACKENDS = {"scs": ScsBackend, "cvxopt": CvxoptBackend}


def get_backend(name=None, **kw):
    """Backend by name; falls back to the environment variable, then to cvxopt."""
    name = name or os.environ.get(ENV_BACKEND, "cvxopt")
    try:
        return BACKENDS[name.lower()](**kw)
    except KeyError:
        raise BackendFailure(f"unknown backend {name!r}; choose from {sorted(BACKENDS)}") from None
