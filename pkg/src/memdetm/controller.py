"""Memory fuzzy controller: stacked gains, control law and the gain file."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, ParseError, ValidationError

GAIN_FORMAT = "memdetm-gains"


@dataclass(frozen=True)
class MemoryGains:
    """Stacked gains of one agent, one n_u x (kappa n_x) array per controller rule.

    Column block order is [K^(kappa) ... K^(1)], so K^(1) multiplies the newest
    entry of the history stack.
    """

    stacked: tuple
    kappa: int

    def __post_init__(self):
        st = tuple(np.atleast_2d(np.array(K, dtype=float)) for K in self.stacked)
        if not st:
            raise DimensionMismatch("need at least one controller rule")
        shape = st[0].shape
        if any(K.shape != shape for K in st) or shape[1] % self.kappa:
            raise DimensionMismatch(f"gain shapes {[K.shape for K in st]} do not fit kappa={self.kappa}")
        object.__setattr__(self, "stacked", st)

    @property
    def nu(self) -> int:
        return self.stacked[0].shape[0]

    @property
    def nx(self) -> int:
        return self.stacked[0].shape[1] // self.kappa

    @property
    def q(self) -> int:
        return len(self.stacked)

    def K(self, s: int, h: int) -> np.ndarray:
        """The block K^(h) of rule ``s`` (h = 1 is the newest)."""
        if not 1 <= h <= self.kappa:
            raise IndexError(h)
        c = (self.kappa - h) * self.nx
        return self.stacked[s][:, c:c + self.nx]

    @classmethod
    def from_blocks(cls, blocks):
        """``blocks[s][h-1]`` is K^(h) of rule s."""
        kappa = len(blocks[0])
        return cls(tuple(np.hstack([np.atleast_2d(b[h]) for h in reversed(range(kappa))])
                         for b in blocks), kappa)

    def perturbed(self, s, row, col, amount):
        st = [K.copy() for K in self.stacked]
        st[s][row, col] += amount
        return MemoryGains(tuple(st), self.kappa)


def stack_history(ring) -> np.ndarray:
    """Concatenate a history ring (oldest first) into one column vector."""
    return np.concatenate([np.asarray(v, dtype=float).reshape(-1) for v in ring])


def unstack_history(vec, kappa: int) -> list:
    return [np.array(v) for v in np.split(np.asarray(vec, dtype=float), kappa)]


def control_input(gains: MemoryGains, membership, delta_stack) -> np.ndarray:
    """u = sum_s n_s K~_s delta~."""
    d = np.asarray(delta_stack, dtype=float).reshape(-1)
    w = np.asarray(membership, dtype=float).reshape(-1)
    if d.size != gains.kappa * gains.nx or w.size != gains.q:
        raise DimensionMismatch(f"history length {d.size} or membership length {w.size} "
                                f"does not fit gains (kappa={gains.kappa}, n_x={gains.nx}, q={gains.q})")
    u = np.zeros(gains.nu)
    for ws, K in zip(w, gains.stacked):
        u += ws * (K @ d)
    return u


@dataclass
class GainFile:
    """Contents of a gain file: gains plus optional certificate data."""

    gains: list
    omega: list | None = None
    P: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def kappa(self) -> int:
        return self.gains[0].kappa


def save_gains(path, gf: GainFile) -> Path:
    """Write a gain file as JSON (format documented in the README)."""
    doc = {"format": GAIN_FORMAT, "version": 1, "kappa": gf.kappa, "agents": []}
    for i, g in enumerate(gf.gains):
        rules = [{"K": {str(h): g.K(s, h).tolist() for h in range(1, g.kappa + 1)}}
                 for s in range(g.q)]
        agent = {"rules": rules}
        if gf.omega is not None and gf.omega[i] is not None:
            agent["omega"] = np.asarray(gf.omega[i]).tolist()
        doc["agents"].append(agent)
    if gf.P is not None:
        doc["P"] = np.asarray(gf.P).tolist()
    if gf.meta:
        doc["meta"] = gf.meta
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1))
    return path


def load_gains(path) -> GainFile:
    path = Path(path)
    if path.is_dir():
        path = path / "gains.json"
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or doc.get("format") != GAIN_FORMAT:
        raise ValidationError(f"{path}: not a {GAIN_FORMAT} file")
    try:
        kappa = int(doc["kappa"])
        gains, omega = [], []
        for i, agent in enumerate(doc["agents"]):
            blocks = []
            for s, rule in enumerate(agent["rules"]):
                K = rule["K"]
                if sorted(K, key=int) != [str(h) for h in range(1, kappa + 1)]:
                    raise ValidationError(f"agent {i} rule {s}: expected K blocks 1..{kappa}")
                blocks.append([np.atleast_2d(np.array(K[str(h)], dtype=float))
                               for h in range(1, kappa + 1)])
            gains.append(MemoryGains.from_blocks(blocks))
            omega.append(np.array(agent["omega"], dtype=float) if "omega" in agent else None)
        P = np.array(doc["P"], dtype=float) if "P" in doc else None
    except (KeyError, TypeError, ValueError, DimensionMismatch) as exc:
        raise ValidationError(f"{path}: malformed gain file ({exc})") from exc
    if all(o is None for o in omega):
        omega = None
    return GainFile(gains, omega, P, doc.get("meta", {}))
