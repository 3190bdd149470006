"""Interval type-2 membership families and their normalization."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ZeroDenominator

GradeFn = Callable[[np.ndarray], np.ndarray]


def _const_blend(value: float, p: int) -> GradeFn:
    arr = np.full(p, float(value))
    return lambda x: arr


@dataclass(frozen=True)
class IT2MembershipFamily:
    """Lower/upper grades plus blending weights for ``n_rules`` rules.

    ``lower`` and ``upper`` map a state vector to an array with one grade per
    rule. ``blend_lower`` gives the weight of the lower grade; the upper weight
    is its complement, so the two always sum to one.
    """

    n_rules: int
    lower: GradeFn
    upper: GradeFn
    blend_lower: GradeFn | None = None
    name: str = "custom"
    params: dict | None = None

    def grades(self, x):
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.lower(x), dtype=float).reshape(-1)
        up = np.asarray(self.upper(x), dtype=float).reshape(-1)
        return lo, up

    def blends(self, x):
        if self.blend_lower is None:
            s = np.full(self.n_rules, 0.5)
        else:
            s = np.asarray(self.blend_lower(np.asarray(x, dtype=float)), dtype=float).reshape(-1)
        return s, 1.0 - s


def normalized_membership(family: IT2MembershipFamily, x) -> np.ndarray:
    """Blend lower and upper grades and normalize them to a convex weight vector."""
    lo, up = family.grades(x)
    s_lo, s_up = family.blends(x)
    raw = s_lo * lo + s_up * up
    total = raw.sum()
    if not total > 0:
        raise ZeroDenominator(f"membership grades vanish at x={np.asarray(x).tolist()}")
    w = raw / total
    return w


def check_interval_order(family: IT2MembershipFamily, samples: Sequence) -> bool:
    """True iff 0 <= lower <= upper <= 1 for every rule at every sample."""
    samples = list(samples)
    if not samples:
        raise ValueError("need at least one sample")
    for x in samples:
        lo, up = family.grades(x)
        if np.any(lo < 0) or np.any(lo > up) or np.any(up > 1):
            return False
    return True


def sigmoid_band(axis: int = 0, shift: float = 0.0, band: float = 0.1,
                 blend: float = 0.5) -> IT2MembershipFamily:
    """Two-rule family built from a logistic upper grade with a fixed uncertainty band.

    Rule 1 has upper grade 1/(1+exp(x[axis]-shift)) and lower grade ``band`` below
    it (clipped at zero). Rule 2 is the complement.
    """
    def upper1(x):
        return 1.0 / (1.0 + np.exp(x[axis] - shift))

    def lower(x):
        u1 = upper1(x)
        return np.array([max(0.0, u1 - band), max(0.0, 1.0 - u1 - band)])

    def upper(x):
        u1 = upper1(x)
        return np.array([u1, 1.0 - max(0.0, u1 - band)])

    return IT2MembershipFamily(2, lower, upper, _const_blend(blend, 2), name="sigmoid_band",
                               params=dict(axis=axis, shift=shift, band=band, blend=blend))


def tabulated(grid, lower, upper, axis: int = 0, blend: float = 0.5) -> IT2MembershipFamily:
    """Piecewise-linear grades tabulated on a 1-D grid along ``axis``.

    ``lower`` and ``upper`` are (n_rules, len(grid)) arrays. Values outside the
    grid are held at the end points.
    """
    grid = np.asarray(grid, dtype=float)
    lo_tab = np.atleast_2d(np.asarray(lower, dtype=float))
    up_tab = np.atleast_2d(np.asarray(upper, dtype=float))
    if lo_tab.shape != up_tab.shape or lo_tab.shape[1] != grid.size:
        raise ValueError("tabulated grades must be (n_rules, len(grid))")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    p = lo_tab.shape[0]

    def interp(tab):
        return lambda x: np.array([np.interp(x[axis], grid, row) for row in tab])

    return IT2MembershipFamily(p, interp(lo_tab), interp(up_tab), _const_blend(blend, p),
                               name="tabulated",
                               params=dict(grid=grid.tolist(), lower=lo_tab.tolist(),
                                           upper=up_tab.tolist(), axis=axis, blend=blend))


def crisp(n_rules: int, active: int = 0) -> IT2MembershipFamily:
    """Family that puts all weight on one rule regardless of the state."""
    g = np.zeros(n_rules)
    g[active] = 1.0
    return IT2MembershipFamily(n_rules, lambda x: g, lambda x: g, _const_blend(0.5, n_rules),
                               name="crisp", params=dict(n_rules=n_rules, active=active))


def constant(lower, upper, blend=0.5) -> IT2MembershipFamily:
    """State-independent grades, mostly useful for testing."""
    lo = np.asarray(lower, dtype=float)
    up = np.asarray(upper, dtype=float)
    return IT2MembershipFamily(lo.size, lambda x: lo, lambda x: up, _const_blend(blend, lo.size),
                               name="constant", params=dict(lower=lo.tolist(), upper=up.tolist(),
                                                            blend=blend))


FAMILIES = {"sigmoid_band": sigmoid_band, "tabulated": tabulated, "crisp": crisp,
            "constant": constant}


def family_from_spec(spec: dict) -> IT2MembershipFamily:
    """Build a family from a ``{"type": name, **params}`` mapping."""
    spec = dict(spec)
    kind = spec.pop("type", None)
    if kind not in FAMILIES:
        raise ValueError(f"unknown membership family {kind!r}; choose from {sorted(FAMILIES)}")
    return FAMILIES[kind](**spec)


def family_to_spec(family: IT2MembershipFamily) -> dict:
    if family.params is None or family.name not in FAMILIES:
        raise ValueError("only named families can be serialized")
    return {"type": family.name, **family.params}
