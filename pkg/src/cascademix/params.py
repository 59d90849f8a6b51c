"""Edge-parameter containers and the JSON model file."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, ParseError
from .graph import DirectedGraph, NodeIds

DEFAULT_NAMES = ("true", "fake")


@dataclass
class ComponentParams:
    """One IC component: activation probability per directed edge."""

    src: np.ndarray
    dst: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64)
        self.dst = np.asarray(self.dst, dtype=np.int64)
        self.p = np.asarray(self.p, dtype=float)
        if not (self.src.shape == self.dst.shape == self.p.shape):
            raise DomainError("src, dst and p must have equal length")
        if np.any((self.p < 0) | (self.p > 1)) or np.any(np.isnan(self.p)):
            raise DomainError("edge probabilities must lie in [0, 1]")

    @classmethod
    def on_graph(cls, graph: DirectedGraph, p) -> "ComponentParams":
        p = np.broadcast_to(np.asarray(p, dtype=float), (graph.m,)).copy()
        return cls(graph.src.copy(), graph.dst.copy(), p)

    def as_dict(self) -> dict[tuple[int, int], float]:
        return dict(zip(zip(self.src.tolist(), self.dst.tolist()), self.p.tolist()))

    def aligned(self, graph: DirectedGraph) -> np.ndarray:
        """Probabilities in ``graph`` edge order; graph edges without a key get 0."""
        out = np.zeros(graph.m)
        for (u, v), p in zip(zip(self.src.tolist(), self.dst.tolist()), self.p.tolist()):
            e = graph.edge_id.get((u, v))
            if e is None:
                raise DomainError(f"parameter edge ({u}, {v}) is not in the graph")
            out[e] = p
        return out

    def __len__(self) -> int:
        return len(self.p)


@dataclass
class MixtureParams:
    """Mixing weights and per-component edge probabilities over one edge set."""

    pi: np.ndarray
    theta: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    nodes: NodeIds
    names: tuple[str, ...] = DEFAULT_NAMES
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float)
        self.theta = np.atleast_2d(np.asarray(self.theta, dtype=float))
        self.src = np.asarray(self.src, dtype=np.int64)
        self.dst = np.asarray(self.dst, dtype=np.int64)
        k = len(self.pi)
        if len(self.names) != k:
            self.names = tuple(DEFAULT_NAMES[:k]) if k <= 2 else tuple(f"c{i}" for i in range(k))
        if abs(self.pi.sum() - 1.0) > 1e-12 or np.any(self.pi < 0) or np.any(self.pi > 1):
            raise DomainError(f"mixing weights {self.pi.tolist()} are not a distribution")
        if self.theta.shape != (k, len(self.src)):
            raise DomainError(f"theta has shape {self.theta.shape}, expected {(k, len(self.src))}")
        if np.any((self.theta < 0) | (self.theta > 1)) or np.any(np.isnan(self.theta)):
            raise DomainError("edge probabilities must lie in [0, 1]")

    @property
    def k(self) -> int:
        return len(self.pi)

    @property
    def m(self) -> int:
        return len(self.src)

    def component(self, i: int | str) -> ComponentParams:
        if isinstance(i, str):
            i = self.names.index(i)
        return ComponentParams(self.src, self.dst, self.theta[i])

    @property
    def theta_true(self) -> ComponentParams:
        return self.component(0)

    @property
    def theta_fake(self) -> ComponentParams:
        return self.component(1)

    def skeleton(self) -> DirectedGraph:
        n = max(len(self.nodes), int(max(self.src.max(initial=-1), self.dst.max(initial=-1))) + 1)
        return DirectedGraph(self.nodes, np.column_stack([self.src, self.dst]), n=n)

    def permuted(self, order: Sequence[int]) -> "MixtureParams":
        order = list(order)
        return MixtureParams(self.pi[order], self.theta[order], self.src, self.dst, self.nodes,
                             tuple(self.names[i] for i in order), dict(self.meta))


def _check(cond: bool, fieldname: str, why: str):
    if not cond:
        raise ParseError(f"model field {fieldname!r}: {why}")


def model_to_dict(params: MixtureParams) -> dict:
    name = params.nodes.name
    us = [name(u) for u in params.src.tolist()]
    vs = [name(v) for v in params.dst.tolist()]
    comps = []
    for i in range(params.k):
        edges = [{"u": u, "v": v, "p": p} for u, v, p in zip(us, vs, params.theta[i].tolist())]
        comps.append({"name": params.names[i], "edges": edges})
    out = {"pi": params.pi.tolist(), "components": comps}
    for key in ("window", "converged", "nll_trace"):
        if key in params.meta:
            out[key] = params.meta[key]
    return out


def model_from_dict(d: dict, nodes: NodeIds | None = None) -> MixtureParams:
    nodes = NodeIds() if nodes is None else nodes
    _check(isinstance(d, dict), "<root>", "not an object")
    _check("pi" in d, "pi", "missing")
    _check("components" in d, "components", "missing")
    pi = d["pi"]
    _check(isinstance(pi, list) and all(isinstance(x, (int, float)) for x in pi), "pi", "not a list of numbers")
    _check(all(0 <= x <= 1 for x in pi), "pi", "entries outside [0, 1]")
    _check(abs(math.fsum(pi) - 1.0) <= 1e-12, "pi", f"sums to {math.fsum(pi)!r}, not 1")
    comps = d["components"]
    _check(isinstance(comps, list) and len(comps) == len(pi), "components", "one component per pi entry required")
    names, thetas, pairs = [], [], None
    for i, comp in enumerate(comps):
        _check(isinstance(comp, dict) and "edges" in comp, f"components[{i}]", "missing edges")
        names.append(str(comp.get("name", f"c{i}")))
        cur, ps = [], []
        for j, e in enumerate(comp["edges"]):
            _check(isinstance(e, dict) and {"u", "v", "p"} <= set(e), f"components[{i}].edges[{j}]", "needs u, v, p")
            p = e["p"]
            _check(isinstance(p, (int, float)) and 0 <= p <= 1, f"components[{i}].edges[{j}].p", "not a probability")
            cur.append((str(e["u"]), str(e["v"])))
            ps.append(float(p))
        if pairs is None:
            pairs = cur
        _check(cur == pairs, f"components[{i}].edges", "edge list differs from component 0")
        thetas.append(ps)
    pairs = pairs or []
    src = [nodes.intern(u) for u, _ in pairs]
    dst = [nodes.intern(v) for _, v in pairs]
    meta = {key: d[key] for key in ("window", "converged", "nll_trace") if key in d}
    theta = np.array(thetas, dtype=float).reshape(len(pi), len(pairs))
    return MixtureParams(np.array(pi, dtype=float), theta, src, dst, nodes, tuple(names), meta)


def save_model(params: MixtureParams, path: str | Path) -> None:
    # json writes floats with repr(), which round-trips every double exactly
    Path(path).write_text(json.dumps(model_to_dict(params), indent=1) + "\n")


def load_model(path: str | Path, nodes: NodeIds | None = None) -> MixtureParams:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"model file {str(path)!r} is not valid JSON: {exc.msg}") from None
    return model_from_dict(d, nodes)
