"""Independent Cascade simulation, live-edge sampling and the synthetic benchmark."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .cascades import Cascade, CascadeSet
from .errors import DomainError
from .graph import DirectedGraph, NodeIds
from .params import ComponentParams, MixtureParams
from .rng import stream

DEFAULT_ROUNDS = 1000
DEFAULT_MIXTURES = ((0.5, 0.5), (0.2, 0.8), (0.35, 0.65))


def _probs(graph: DirectedGraph, params) -> np.ndarray:
    if isinstance(params, ComponentParams):
        return params.aligned(graph)
    p = np.asarray(params, dtype=float)
    if p.shape != (graph.m,):
        raise DomainError("edge probabilities must align with graph edges")
    return p


def _seed_array(graph: DirectedGraph, seeds: Iterable[int]) -> np.ndarray:
    s = np.unique(np.fromiter(seeds, dtype=np.int64))
    if s.size == 0:
        raise DomainError("seed set is empty")
    if s.min() < 0 or s.max() >= graph.n:
        raise DomainError("seed is not a node of the graph")
    return s


def simulate_ic(graph: DirectedGraph, params, seeds: Iterable[int], rng_seed: int = 0,
                cascade_id: str = "sim", label: str | None = None) -> Cascade:
    """One IC run; activation times are the integer steps 0, 1, 2, ..."""
    p = _probs(graph, params)
    rng = stream(rng_seed) if not isinstance(rng_seed, np.random.Generator) else rng_seed
    frontier = _seed_array(graph, seeds).tolist()
    active = set(frontier)
    users, times = list(frontier), [0.0] * len(frontier)
    t = 0
    out_ptr, out_edges, dst = graph.out_ptr, graph.out_edges, graph.dst
    while frontier:
        t += 1
        nxt = []
        for u in frontier:
            edges = out_edges[out_ptr[u]:out_ptr[u + 1]]
            if not len(edges):
                continue
            draws = rng.random(len(edges))
            for e, x in zip(edges.tolist(), draws.tolist()):
                v = int(dst[e])
                if v not in active and x < p[e]:
                    active.add(v)
                    nxt.append(v)
        users.extend(nxt)
        times.extend([float(t)] * len(nxt))
        frontier = nxt
    return Cascade(cascade_id, tuple(users), tuple(times), label)


@dataclass
class LiveEdgeGraph:
    src: np.ndarray
    dst: np.ndarray
    live: np.ndarray


def sample_live_edge_graph(params: ComponentParams, rng_seed: int = 0) -> LiveEdgeGraph:
    live = stream(rng_seed).random(len(params)) < params.p
    return LiveEdgeGraph(params.src.copy(), params.dst.copy(), live)


def _incidence(graph: DirectedGraph) -> sp.csr_matrix:
    return sp.csr_matrix((np.ones(graph.m, dtype=np.float32), (np.arange(graph.m), graph.dst)),
                         shape=(graph.m, graph.n))


def reach(graph: DirectedGraph, live: np.ndarray, start: np.ndarray, incidence=None) -> np.ndarray:
    """Nodes reachable over live edges, for a batch of live-edge samples.

    ``live`` is ``(R, m)`` and ``start`` an ``(R, n)`` or ``(n,)`` boolean mask.
    Returns the ``(R, n)`` reached mask (start included).
    """
    D = _incidence(graph) if incidence is None else incidence
    active = np.array(np.broadcast_to(start, (live.shape[0], graph.n)), dtype=bool)
    frontier = active
    src = graph.src
    while frontier.any():
        fired = frontier[:, src] & live
        if not fired.any():
            break
        hit = (D.T @ fired.T.astype(np.float32)).T > 0
        frontier = hit & ~active
        active |= frontier
    return active


@dataclass(frozen=True)
class InfluenceEstimate:
    mean: float
    se: float
    rounds: int


def _chunks(total: int, size: int):
    for lo in range(0, total, size):
        yield lo, min(total, lo + size)


def estimate_influence(graph: DirectedGraph, params, seeds: Iterable[int], rounds: int = DEFAULT_ROUNDS,
                       rng_seed: int = 0, method: str = "live_edge") -> InfluenceEstimate:
    """Monte Carlo spread. ``method="ic"`` runs the step-by-step process,
    ``"live_edge"`` counts reachability over sampled live-edge graphs."""
    if rounds < 1:
        raise DomainError("rounds must be >= 1")
    p = _probs(graph, params)
    s = _seed_array(graph, seeds)
    if method == "ic":
        sizes = np.array([len(simulate_ic(graph, p, s, stream(rng_seed, r))) for r in range(rounds)], dtype=float)
    elif method == "live_edge":
        start = np.zeros(graph.n, dtype=bool)
        start[s] = True
        D = _incidence(graph)
        sizes = np.empty(rounds)
        chunk = max(1, 2_000_000 // max(graph.m, graph.n, 1))
        for i, (lo, hi) in enumerate(_chunks(rounds, chunk)):
            live = stream(rng_seed, i).random((hi - lo, graph.m)) < p
            sizes[lo:hi] = reach(graph, live, start, D).sum(axis=1)
    else:
        raise DomainError(f"unknown method {method!r}")
    se = sizes.std(ddof=1) / math.sqrt(rounds) if rounds > 1 else 0.0
    return InfluenceEstimate(float(sizes.mean()), float(se), rounds)


@dataclass(frozen=True)
class SeedDistribution:
    """How seed sets are drawn: sizes ~ floor(Pareto(exponent)) capped at ``max_size``."""

    mode: str = "power-law-size"
    exponent: float = 2.5
    max_size: int | None = None
    explicit: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        if self.mode not in ("uniform-nodes", "power-law-size", "explicit-list"):
            raise DomainError(f"unknown seed mode {self.mode!r}")
        if not self.exponent > 1:
            raise DomainError("power-law exponent must exceed 1")
        if self.mode == "explicit-list" and not self.explicit:
            raise DomainError("explicit-list mode needs at least one seed set")

    def size(self, rng: np.random.Generator, n: int) -> int:
        cap = n if self.max_size is None else min(n, self.max_size)
        x = (1.0 - rng.random()) ** (-1.0 / (self.exponent - 1.0))
        return int(min(max(1, math.floor(x)), cap))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.mode == "explicit-list":
            return np.array(self.explicit[rng.integers(len(self.explicit))], dtype=np.int64)
        size = 1 if self.mode == "uniform-nodes" else self.size(rng, n)
        return rng.choice(n, size=size, replace=False)


def sample_mixture_cascades(graph: DirectedGraph, mix: MixtureParams, seed_dist: SeedDistribution,
                            n: int, rng_seed: int = 0, start: int = 0) -> CascadeSet:
    """``n`` labelled cascades; cascade ``i`` depends only on ``(rng_seed, i)``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    probs = [mix.component(i).aligned(graph) for i in range(mix.k)]
    out = []
    for i in range(start, start + n):
        rng = stream(rng_seed, i)
        seeds = seed_dist.sample(rng, graph.n)
        h = int(rng.choice(mix.k, p=mix.pi))
        out.append(simulate_ic(graph, probs[h], seeds, rng, f"c{i}", mix.names[h]))
    return CascadeSet(out, graph.nodes)


def random_graph(n_nodes: int, n_edges: int, rng_seed: int = 0) -> DirectedGraph:
    """Uniform simple digraph: ``n_edges`` distinct ordered pairs, no self-loops."""
    total = n_nodes * (n_nodes - 1)
    if n_edges > total or n_edges < 0:
        raise DomainError(f"cannot place {n_edges} edges on {n_nodes} nodes")
    idx = np.sort(stream(rng_seed).choice(total, size=n_edges, replace=False))
    u = idx // (n_nodes - 1)
    v = idx % (n_nodes - 1)
    v = v + (v >= u)
    return DirectedGraph(NodeIds.range(n_nodes), np.column_stack([u, v]))


@dataclass
class Benchmark:
    graph: DirectedGraph
    theta: np.ndarray
    mixtures: tuple[tuple[float, ...], ...]
    cascades: dict[tuple[tuple[float, ...], int], CascadeSet] = field(default_factory=dict)
    seed: int = 0

    def truth(self, pi: Sequence[float]) -> MixtureParams:
        return MixtureParams(np.array(pi, dtype=float), self.theta, self.graph.src, self.graph.dst, self.graph.nodes)


def generate_synthetic_benchmark(n_nodes: int = 512, n_edges: int = 1024,
                                 mixtures: Sequence[Sequence[float]] = DEFAULT_MIXTURES,
                                 sample_sizes: Sequence[int] = (100,), rng_seed: int = 0,
                                 seed_dist: SeedDistribution = SeedDistribution()) -> Benchmark:
    """Random graph, U[0,1] edge probabilities per component, labelled cascade sets.

    Sample sizes for one mixture are nested: the 100-cascade set is the first
    100 cascades of the 5000-cascade set.
    """
    graph = random_graph(n_nodes, n_edges, rng_seed)
    theta = stream(rng_seed, 1).random((2, graph.m))
    mixtures = tuple(tuple(float(x) for x in pi) for pi in mixtures)
    bench = Benchmark(graph, theta, mixtures, seed=rng_seed)
    for j, pi in enumerate(mixtures):
        mix = bench.truth(pi)
        full = sample_mixture_cascades(graph, mix, seed_dist, max(sample_sizes), stream_key(rng_seed, j))
        for size in sample_sizes:
            bench.cascades[(pi, size)] = full[:size]
    return bench


def stream_key(seed: int, *keys: int) -> int:
    """Derive an integer seed for a sub-run from ``(seed, *keys)``."""
    return int(stream(seed, *keys).integers(2**63))
