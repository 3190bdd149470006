"""Scenario files: parsing, validation and serialization."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .detm import DetmParams, REFRESH_MODES, make_H
from .errors import DimensionMismatch, ParseError, ValidationError
from .fuzzy import family_from_spec
from .plant import AgentModel, augment
from .synthesis.problem import OMEGA_FORMS, SynthesisProblem
from .synthesis.solve import SIGMA_GRID
from .topology import Topology, build_graph_matrices

BUNDLED = ("paper_s4",)
DEFAULT_MEMBERSHIP = {"type": "sigmoid_band", "axis": 0, "shift": 0.0, "band": 0.1}


@dataclass
class Scenario:
    """Validated scenario; ``doc`` keeps the normalized source mapping for round trips."""

    name: str
    kappa: int
    models: list
    topology: Topology
    detm: list
    initial_states: np.ndarray
    horizon: int = 100
    sigma: float = 1.0
    epsilon: float = 1e-6
    sigma_grid: tuple = SIGMA_GRID
    omega_form: str = "expanded"
    refresh: str = "step"
    divergence: float = 1e12
    settle: float = 1e-2
    output_dir: str = "out"
    doc: dict = field(default_factory=dict, repr=False)

    @property
    def N(self) -> int:
        return len(self.models)

    @property
    def nx(self) -> int:
        return self.models[0].nx

    @property
    def graph(self):
        return build_graph_matrices(self.topology)

    def H(self, i) -> np.ndarray:
        return make_H(self.detm[i].get("H"), self.nx, self.kappa)

    def detm_params(self, omegas=None) -> list:
        """Per-agent trigger parameters; omega comes from ``omegas``, the file, or identity."""
        out = []
        for i, d in enumerate(self.detm):
            om = None if omegas is None else omegas[i]
            if om is None:
                om = d.get("omega")
            if om is None:
                om = np.eye(self.nx)
            out.append(DetmParams(d["alpha"], d["beta"], d["theta"], om, self.H(i), self.kappa))
        return out

    def synthesis_problem(self, sigma=None, epsilon=None, omega_form=None) -> SynthesisProblem:
        return SynthesisProblem(
            [augment(m, self.kappa) for m in self.models], self.graph,
            [d["alpha"] for d in self.detm], [d["beta"] for d in self.detm],
            [self.H(i) for i in range(self.N)], [m.q for m in self.models],
            sigma=self.sigma if sigma is None else sigma,
            epsilon=self.epsilon if epsilon is None else epsilon,
            omega_form=omega_form or self.omega_form)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.doc)


def _matrix(value, where, shape=None):
    try:
        arr = np.atleast_2d(np.array(value, dtype=float))
    except (TypeError, ValueError):
        raise ValidationError(f"{where}: not a numeric matrix") from None
    if arr.ndim != 2:
        raise ValidationError(f"{where}: expected a matrix")
    if shape is not None and arr.shape != shape:
        raise ValidationError(f"{where}: expected shape {shape}, got {arr.shape}")
    return arr


def _require(doc, key, where):
    if key not in doc:
        raise ValidationError(f"{where}: missing field {key!r}")
    return doc[key]


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ValidationError("scenario must be a mapping")
    doc = copy.deepcopy(doc)
    kappa = int(_require(doc, "kappa", "scenario"))
    if kappa < 1:
        raise ValidationError("kappa: must be >= 1")
    agents = _require(doc, "agents", "scenario")
    if not isinstance(agents, list) or not agents:
        raise ValidationError("agents: need a nonempty list")
    defaults = doc.get("detm_defaults", {}) or {}
    models, detm = [], []
    nx = nu = None
    for i, ag in enumerate(agents):
        where = f"agents[{i}]"
        rules = _require(ag, "rules", where)
        pairs = []
        for l, r in enumerate(rules):
            A = _matrix(_require(r, "A", f"{where}.rules[{l}]"), f"{where}.rules[{l}].A")
            if A.shape[0] != A.shape[1]:
                raise ValidationError(f"{where}.rules[{l}].A: must be square, got {A.shape}")
            nx = A.shape[0] if nx is None else nx
            if A.shape[0] != nx:
                raise ValidationError(f"{where}.rules[{l}].A: state dimension {A.shape[0]} differs from {nx}")
            B = _matrix(_require(r, "B", f"{where}.rules[{l}]"), f"{where}.rules[{l}].B")
            if B.shape[0] != nx and B.shape[1] == nx and B.shape[0] == 1:
                B = B.T
            nu = B.shape[1] if nu is None else nu
            if B.shape != (nx, nu):
                raise ValidationError(f"{where}.rules[{l}].B: expected shape {(nx, nu)}, got {B.shape}")
            pairs.append((A, B))
        try:
            pm = family_from_spec(ag.get("membership", DEFAULT_MEMBERSHIP))
            cm_spec = ag.get("controller_membership")
            cm = family_from_spec(cm_spec) if cm_spec is not None else None
            models.append(AgentModel(tuple(pairs), pm, cm))
        except (ValueError, TypeError, DimensionMismatch) as exc:
            raise ValidationError(f"{where}: {exc}") from None
        d = dict(defaults)
        d.update(ag.get("detm", {}) or {})
        for key in ("alpha", "beta", "theta"):
            if key not in d:
                raise ValidationError(f"{where}.detm: missing field {key!r}")
            d[key] = float(d[key])
        if d.get("omega") is not None:
            d["omega"] = _matrix(d["omega"], f"{where}.detm.omega")
        detm.append(d)
    N = len(models)
    topo_doc = _require(doc, "topology", "scenario")
    adj = _matrix(_require(topo_doc, "adjacency", "topology"), "topology.adjacency", (N, N))
    pin = np.array(_require(topo_doc, "pinning", "topology"), dtype=float).reshape(-1)
    if pin.size != N:
        raise ValidationError(f"topology.pinning: expected {N} entries, got {pin.size}")
    x0 = _matrix(_require(doc, "initial_states", "scenario"), "initial_states", (N, nx))
    syn = doc.get("synthesis", {}) or {}
    sim = doc.get("simulation", {}) or {}
    sc = Scenario(
        name=str(doc.get("name", "scenario")), kappa=kappa, models=models,
        topology=Topology(adj, pin), detm=detm, initial_states=x0,
        horizon=int(sim.get("horizon", doc.get("horizon", 100))),
        sigma=float(syn.get("sigma", 1.0)), epsilon=float(syn.get("epsilon", 1e-6)),
        sigma_grid=tuple(float(s) for s in syn.get("sigma_grid", SIGMA_GRID)),
        omega_form=str(syn.get("omega_form", "expanded")),
        refresh=str(sim.get("refresh", "step")),
        divergence=float(sim.get("divergence", 1e12)), settle=float(sim.get("settle", 1e-2)),
        output_dir=str(doc.get("output_dir", "out")), doc=doc)
    if sc.horizon < 1:
        raise ValidationError("simulation.horizon: must be >= 1")
    if sc.omega_form not in OMEGA_FORMS:
        raise ValidationError(f"synthesis.omega_form: must be one of {OMEGA_FORMS}")
    if sc.refresh not in REFRESH_MODES:
        raise ValidationError(f"simulation.refresh: must be one of {REFRESH_MODES}")
    if np.any(adj < 0) or np.any(pin < 0) or np.any(np.diag(adj) != 0):
        raise ValidationError("topology: weights must be nonnegative with a zero diagonal")
    try:
        sc.detm_params()
    except (ValueError, DimensionMismatch) as exc:
        raise ValidationError(f"detm: {exc}") from None
    return sc


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("memdetm") / "scenarios" / f"{name}.yaml"))


def bundled_gains_path(name: str) -> Path:
    return Path(str(resources.files("memdetm") / "scenarios" / f"{name}_gains.json"))


def load_scenario(path) -> Scenario:
    """Load a YAML scenario by path, or a bundled one by name (e.g. ``paper_s4``)."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        p = bundled_path(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ParseError(f"{p}: {where}: {exc.problem}") from exc
    except yaml.YAMLError as exc:
        raise ParseError(f"{p}: {exc}") from exc
    return scenario_from_dict(doc)


def dump_scenario(sc: Scenario, path) -> Path:
    path = Path(path)
    path.write_text(yaml.safe_dump(_plain(sc.to_dict()), sort_keys=False))
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
