"""Communication graph and the per-agent Laplacian and pinning blocks."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import DimensionMismatch, NegativeWeight


@dataclass(frozen=True)
class Topology:
    """Directed weighted graph; ``a[i, j]`` is the weight agent i gives to agent j."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float).reshape(-1)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != b.size:
            raise DimensionMismatch(f"adjacency {a.shape} and pinning {b.shape} disagree")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def N(self) -> int:
        return self.b.size

    def strongly_connected(self) -> bool:
        n, _ = connected_components(self.a != 0, directed=True, connection="strong")
        return n == 1


@dataclass(frozen=True)
class GraphMatrices:
    """L_i, R_i for each agent and their sums L, R."""

    L_i: list
    R_i: list
    L: np.ndarray
    R: np.ndarray
    a_bar: np.ndarray
    topology: Topology = field(repr=False)

    @property
    def N(self) -> int:
        return self.L.shape[0]

    def LR(self, i=None):
        """(L_i + R_i) for one agent, or L + R when ``i`` is None."""
        if i is None:
            return self.L + self.R
        return self.L_i[i] + self.R_i[i]


def build_graph_matrices(topo: Topology) -> GraphMatrices:
    """Split the pinned Laplacian into one row-block per agent."""
    a, b = topo.a, topo.b
    if np.any(a < 0) or np.any(b < 0):
        raise NegativeWeight("adjacency weights and pinning gains must be nonnegative")
    if np.any(np.diag(a) != 0):
        raise NegativeWeight("self loops are not allowed (a_ii must be 0)")
    N = topo.N
    if not np.any(b > 0) and not topo.strongly_connected():
        warnings.warn("no pinned agent and graph not strongly connected; "
                      "consensus to the origin is not guaranteed", RuntimeWarning, stacklevel=2)
    a_bar = a.sum(axis=1)
    L_i, R_i = [], []
    for i in range(N):
        Li = np.zeros((N, N))
        Li[i] = -a[i]
        Li[i, i] = a_bar[i]
        Ri = np.zeros((N, N))
        Ri[i, i] = b[i]
        L_i.append(Li)
        R_i.append(Ri)
    return GraphMatrices(L_i, R_i, sum(L_i), sum(R_i), a_bar, topo)
