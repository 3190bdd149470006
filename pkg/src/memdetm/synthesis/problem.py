"""Synthesis problem data, decision-variable layout and result container."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch
from ..plant import AugmentedModel, check_uniform
from ..topology import GraphMatrices

OMEGA_FORMS = ("expanded", "projected")


@dataclass(frozen=True)
class SynthesisProblem:
    """Data of the stabilization LMIs.

    ``omega_form`` selects how the trigger weight enters: ``"projected"`` uses
    W_i = H^T Omega_i H with Omega_i of size n_x, ``"expanded"`` makes W_i a free
    kappa n_x square variable.
    """

    models: tuple
    graph: GraphMatrices
    alpha: np.ndarray
    beta: np.ndarray
    H: tuple
    q: tuple
    sigma: float = 1.0
    epsilon: float = 1e-6
    omega_form: str = "expanded"

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float).reshape(-1))
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float).reshape(-1))
        object.__setattr__(self, "H", tuple(np.atleast_2d(np.asarray(h, dtype=float)) for h in self.H))
        object.__setattr__(self, "q", tuple(int(v) for v in self.q))
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.omega_form not in OMEGA_FORMS:
            raise ValueError(f"omega_form must be one of {OMEGA_FORMS}")
        kappa, n, nu = check_uniform(self.models)
        N = len(self.models)
        for name, seq in (("alpha", self.alpha), ("beta", self.beta), ("H", self.H), ("q", self.q)):
            if len(seq) != N:
                raise DimensionMismatch(f"{name} needs one entry per agent")
        if self.graph.N != N:
            raise DimensionMismatch("graph size differs from agent count")
        for h in self.H:
            if h.shape != (n // kappa, n):
                raise DimensionMismatch(f"H has shape {h.shape}, expected ({n // kappa}, {n})")

    @property
    def N(self) -> int:
        return len(self.models)

    @property
    def kappa(self) -> int:
        return self.models[0].kappa

    @property
    def n(self) -> int:
        return self.models[0].n

    @property
    def nx(self) -> int:
        return self.n // self.kappa

    @property
    def nu(self) -> int:
        return self.models[0].nu

    @property
    def D(self) -> int:
        return self.N * self.n

    @property
    def M(self) -> int:
        return self.N * self.N * self.nu

    @property
    def size(self) -> int:
        return 3 * self.D + self.M

    @property
    def p(self) -> tuple:
        return tuple(len(m.A) for m in self.models)

    def vertices(self) -> list:
        """All (plant rules, controller rules) multi-indices."""
        import itertools
        ls = itertools.product(*[range(p) for p in self.p])
        return [(l, s) for l in ls for s in itertools.product(*[range(q) for q in self.q])]

    def with_(self, **kw) -> "SynthesisProblem":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return SynthesisProblem(**d)


@dataclass(frozen=True)
class _Block:
    name: str
    key: tuple
    shape: tuple
    symmetric: bool
    start: int
    basis: np.ndarray  # (count, rows*cols)

    @property
    def count(self) -> int:
        return self.basis.shape[0]


def _sym_basis(m):
    out = []
    for c in range(m):
        for r in range(c, m):
            E = np.zeros((m, m))
            E[r, c] = E[c, r] = 1.0
            out.append(E.reshape(-1))
    return np.array(out)


def _full_basis(r, c):
    return np.eye(r * c)


class VariableLayout:
    """Maps a flat decision vector z to the matrices P, W/Omega, X, Y."""

    def __init__(self, problem: SynthesisProblem, controller: bool = True):
        self.problem = pr = problem
        self.blocks = []
        self._add("P", (), (pr.D, pr.D), True)
        wdim = pr.n if pr.omega_form == "expanded" else pr.nx
        for i in range(pr.N):
            self._add("W", (i,), (wdim, wdim), True)
        if not controller:
            return
        for i in range(pr.N):
            for s in range(pr.q[i]):
                self._add("X", (i, s), (pr.nu, pr.nu), True)
        for i in range(pr.N):
            for s in range(pr.q[i]):
                self._add("Y", (i, s), (pr.nu, pr.n), False)

    def _add(self, name, key, shape, sym):
        start = self.size
        basis = _sym_basis(shape[0]) if sym else _full_basis(*shape)
        self.blocks.append(_Block(name, key, shape, sym, start, basis))

    @property
    def size(self) -> int:
        return sum(b.count for b in self.blocks)

    def block(self, name, key=()):
        for b in self.blocks:
            if b.name == name and b.key == tuple(key):
                return b
        raise KeyError((name, key))

    def batch(self, Z) -> dict:
        """Evaluate the variable matrices for each row of Z (shape (b, size))."""
        Z = np.atleast_2d(Z)
        pr = self.problem
        out = {"P": None, "W": [None] * pr.N,
               "X": [[None] * pr.q[i] for i in range(pr.N)],
               "Y": [[None] * pr.q[i] for i in range(pr.N)]}
        for blk in self.blocks:
            vals = (Z[:, blk.start:blk.start + blk.count] @ blk.basis).reshape((-1,) + blk.shape)
            if blk.name == "P":
                out["P"] = vals
            elif blk.name == "W":
                if pr.omega_form == "projected":
                    H = pr.H[blk.key[0]]
                    out.setdefault("Omega", [None] * pr.N)[blk.key[0]] = vals
                    vals = H.T @ vals @ H
                out["W"][blk.key[0]] = vals
            else:
                i, s = blk.key
                out[blk.name][i][s] = vals
        return out

    def unpack(self, z) -> dict:
        """Single assignment as plain matrices."""
        b = self.batch(np.asarray(z, dtype=float)[None, :])
        strip = lambda v: None if v is None else v[0]
        out = {"P": strip(b["P"]), "W": [strip(w) for w in b["W"]],
               "X": [[strip(x) for x in row] for row in b["X"]],
               "Y": [[strip(y) for y in row] for row in b["Y"]]}
        if "Omega" in b:
            out["Omega"] = [strip(o) for o in b["Omega"]]
        return out

    def pack(self, values: dict) -> np.ndarray:
        """Inverse of unpack for consistent values (used for rescaling tests)."""
        z = np.zeros(self.size)
        for blk in self.blocks:
            if blk.name == "P":
                M = values["P"]
            elif blk.name == "W":
                M = (values["Omega"] if self.problem.omega_form == "projected" else values["W"])[blk.key[0]]
            else:
                i, s = blk.key
                M = values[blk.name][i][s]
            M = np.asarray(M, dtype=float)
            if blk.symmetric:
                m = blk.shape[0]
                r, c = [], []
                for cc in range(m):
                    for rr in range(cc, m):
                        r.append(rr)
                        c.append(cc)
                z[blk.start:blk.start + blk.count] = M[r, c]
            else:
                z[blk.start:blk.start + blk.count] = M.reshape(-1)
        return z


@dataclass
class SynthesisResult:
    """Certificate and recovered gains.

    ``margin`` is the smallest distance -lambda_max(Xi) over all vertices, so a
    certificate at level eps needs margin >= eps.
    """

    feasible: bool
    P: np.ndarray
    W: list
    X: list
    Y: list
    gains: list
    margin: float
    vertex_max_eig: list
    sigma: float
    epsilon: float
    omega_form: str
    Omega: list | None = None
    solver_info: dict = field(default_factory=dict)

    @property
    def trigger_weights(self) -> list:
        """Matrices handed to the trigger rule (Omega_i, or W_i in the expanded form)."""
        if self.omega_form == "projected" and self.Omega is not None:
            return self.Omega
        return self.W
