"""Directed graphs, follower-graph ingestion and per-cascade retweet forests."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ParseError


class NodeIds:
    """Interns opaque user identifiers to dense integer indices."""

    def __init__(self, names: Iterable[str] = ()):
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        for name in names:
            self.intern(name)

    def intern(self, name: str) -> int:
        idx = self._index.get(name)
        if idx is None:
            idx = len(self._names)
            self._index[name] = idx
            self._names.append(name)
        return idx

    def index(self, name: str) -> int:
        return self._index[name]

    def get(self, name: str, default=None):
        return self._index.get(name, default)

    def name(self, idx: int) -> str:
        return self._names[idx]

    @property
    def names(self) -> list[str]:
        return list(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return len(self._names)

    @classmethod
    def range(cls, n: int) -> "NodeIds":
        return cls(str(i) for i in range(n))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class DirectedGraph:
    """Immutable directed graph over ``n`` interned nodes.

    Edges keep their insertion order; ``src[e], dst[e]`` is edge ``e``. Optional
    per-edge weights are probabilities in [0, 1].
    """

    def __init__(
        self,
        nodes: NodeIds,
        edges: Sequence[tuple[int, int]] | np.ndarray,
        weights: Sequence[float] | np.ndarray | None = None,
        n: int | None = None,
    ):
        self.nodes = nodes
        self.n = len(nodes) if n is None else int(n)
        arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if arr.size and (arr.min() < 0 or arr.max() >= self.n):
            raise DomainError("edge endpoint is not a registered node")
        if np.any(arr[:, 0] == arr[:, 1]):
            u = int(arr[arr[:, 0] == arr[:, 1]][0, 0])
            raise DomainError(f"self-loop on node {self.nodes.name(u)!r}")
        self.src = _frozen(arr[:, 0].copy())
        self.dst = _frozen(arr[:, 1].copy())
        self.edge_id: dict[tuple[int, int], int] = {}
        for e, (u, v) in enumerate(zip(self.src.tolist(), self.dst.tolist())):
            if (u, v) in self.edge_id:
                raise DomainError(f"duplicate edge ({self.nodes.name(u)!r}, {self.nodes.name(v)!r})")
            self.edge_id[(u, v)] = e
        if weights is not None:
            w = np.asarray(weights, dtype=float)
            if w.shape != (self.m,):
                raise DomainError("one weight per edge required")
            if np.any((w < 0) | (w > 1)) or np.any(np.isnan(w)):
                raise DomainError("edge weights must lie in [0, 1]")
            weights = _frozen(w.copy())
        self.weight = weights

        order = np.argsort(self.src, kind="stable")
        self.out_edges = _frozen(order.astype(np.int64))
        counts = np.bincount(self.src, minlength=self.n)
        self.out_ptr = _frozen(np.concatenate([[0], np.cumsum(counts)]).astype(np.int64))

    @property
    def m(self) -> int:
        return len(self.src)

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self.edge_id

    def successors(self, u: int) -> np.ndarray:
        return self.dst[self.out_edges[self.out_ptr[u]:self.out_ptr[u + 1]]]

    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist()))

    def edge_names(self) -> list[tuple[str, str]]:
        name = self.nodes.name
        return [(name(u), name(v)) for u, v in self.edges()]

    def without_edges(self, removed: Iterable[int]) -> "DirectedGraph":
        keep = np.ones(self.m, dtype=bool)
        keep[list(removed)] = False
        w = None if self.weight is None else self.weight[keep]
        return DirectedGraph(self.nodes, np.column_stack([self.src[keep], self.dst[keep]]), w, n=self.n)

    def __repr__(self) -> str:
        return f"DirectedGraph(n={self.n}, m={self.m})"


def load_edge_list(
    source: str | Iterable[str],
    directed: bool = True,
    nodes: NodeIds | None = None,
) -> DirectedGraph:
    """Parse ``u v [w]`` lines (tab or space separated, ``#`` comments).

    Duplicate edges collapse to the first occurrence. With ``directed=False``
    each line adds both orientations.
    """
    nodes = NodeIds() if nodes is None else nodes
    lines = source.splitlines() if isinstance(source, str) else source
    seen: dict[tuple[int, int], float | None] = {}
    any_weight = False
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cols = line.split()
        if len(cols) not in (2, 3):
            raise ParseError(f"expected 2 or 3 columns, got {len(cols)}", lineno)
        if cols[0] == cols[1]:
            raise DomainError(f"line {lineno}: self-loop on {cols[0]!r}")
        w = None
        if len(cols) == 3:
            try:
                w = float(cols[2])
            except ValueError:
                raise ParseError(f"bad weight {cols[2]!r}", lineno) from None
            if not 0.0 <= w <= 1.0:
                raise DomainError(f"line {lineno}: weight {w} outside [0, 1]")
            any_weight = True
        u, v = nodes.intern(cols[0]), nodes.intern(cols[1])
        pairs = [(u, v)] if directed else [(u, v), (v, u)]
        for pair in pairs:
            seen.setdefault(pair, w)
    edges = list(seen)
    weights = None
    if any_weight:
        if any(w is None for w in seen.values()):
            raise ParseError("weight column present on some lines but not others")
        weights = list(seen.values())
    return DirectedGraph(nodes, edges, weights)


def dump_edge_list(graph: DirectedGraph) -> str:
    out = []
    for e, (u, v) in enumerate(graph.edge_names()):
        if graph.weight is None:
            out.append(f"{u}\t{v}\n")
        else:
            out.append(f"{u}\t{v}\t{float(graph.weight[e])!r}\n")
    return "".join(out)


@dataclass
class RetweetGraph:
    """Attribution forest for one cascade: ``parent[child] = parent``."""

    cascade_id: str
    engaged: list[int]
    parent: dict[int, int] = field(default_factory=dict)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(p, c) for c, p in self.parent.items()]

    @property
    def roots(self) -> list[int]:
        return [u for u in self.engaged if u not in self.parent]


def build_retweet_graph(cascade, followers: DirectedGraph) -> RetweetGraph:
    """Attribute each engagement to the latest earlier engager the user follows.

    ``followers`` holds ``(A, B)`` when A follows B; content flows B -> A. Event
    order in the cascade is already a strict order (ties broken on ingestion).
    """
    position = {u: i for i, u in enumerate(cascade.users)}
    parent = {}
    for i, a in enumerate(cascade.users):
        if a >= followers.n:
            continue
        best = -1
        for b in followers.successors(a).tolist():
            j = position.get(b, -1)
            if best < j < i:
                best = j
        if best >= 0:
            parent[a] = cascade.users[best]
    return RetweetGraph(cascade.id, list(cascade.users), parent)


@dataclass(frozen=True)
class ComponentStats:
    cc_count: int
    r: float


def weak_component_stats(g: RetweetGraph, n_engagements: int) -> ComponentStats:
    if n_engagements < 1:
        raise DomainError("n_engagements must be >= 1")
    root = {}

    def find(x):
        root.setdefault(x, x)
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    merged = 0
    for u, v in g.edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            root[ru] = rv
            merged += 1
    cc = n_engagements - merged
    return ComponentStats(cc, cc / n_engagements)
