"""Influential users per component (lazy greedy) and how often they show up in fake cascades."""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .diffusion import DEFAULT_ROUNDS, _incidence, _probs, reach
from .errors import DomainError
from .graph import DirectedGraph
from .rng import stream

log = logging.getLogger(__name__)

DEFAULT_TOP_K = 100
TIE_SLACK = 1e-9


@dataclass
class InfluencerRanking:
    component: str
    nodes: list[int]
    gains: list[float]
    rounds: int

    @property
    def cumulative(self) -> list[float]:
        return np.cumsum(self.gains).tolist()

    def __len__(self) -> int:
        return len(self.nodes)


class LiveEdgeSpread:
    """Spread over a fixed batch of live-edge samples.

    Every evaluation reuses the same samples (common random numbers), so the
    estimate is itself a monotone submodular set function.
    """

    def __init__(self, graph: DirectedGraph, params, rounds: int = DEFAULT_ROUNDS, rng_seed: int = 0):
        if rounds < 1:
            raise DomainError("rounds must be >= 1")
        self.graph = graph
        self.rounds = rounds
        p = _probs(graph, params)
        self.live = stream(rng_seed).random((rounds, graph.m)) < p
        self._D = _incidence(graph)

    def reached(self, start: np.ndarray) -> np.ndarray:
        return reach(self.graph, self.live, start, self._D)

    def __call__(self, seeds: Iterable[int]) -> float:
        start = np.zeros(self.graph.n, dtype=bool)
        start[list(seeds)] = True
        return float(self.reached(start).sum(axis=1).mean())


def greedy_influencers(graph: DirectedGraph, params, K: int = DEFAULT_TOP_K, rounds: int = DEFAULT_ROUNDS,
                       rng_seed: int = 0, spread: Callable[[frozenset], float] | None = None,
                       component: str = "fake") -> InfluencerRanking:
    """Lazy-forward greedy seed selection.

    Cached marginal gains are upper bounds (submodularity), so a popped entry
    whose gain was computed for the current seed set is the true maximum.
    Ties go to the smaller node index; gains within ``TIE_SLACK`` (relative)
    of the top are refreshed first so rounding cannot reorder a tie. ``spread`` overrides the Monte Carlo
    estimator with any set function.
    """
    if K < 1:
        raise DomainError("K must be >= 1")
    n = graph.n
    if K > n:
        log.warning("K=%d exceeds %d nodes, ranking truncated", K, n)
        K = n

    if spread is None:
        mc = LiveEdgeSpread(graph, params, rounds, rng_seed)
        covered = np.zeros((rounds, n), dtype=bool)

        def gain(v: int) -> float:
            start = covered.copy()
            start[:, v] = True
            return float(mc.reached(start).sum(axis=1).mean() - covered.sum(axis=1).mean())

        def commit(v: int) -> None:
            nonlocal covered
            start = covered.copy()
            start[:, v] = True
            covered = mc.reached(start)
    else:
        chosen: set[int] = set()
        base = [spread(frozenset())]

        def gain(v: int) -> float:
            return spread(frozenset(chosen | {v})) - base[0]

        def commit(v: int) -> None:
            chosen.add(v)
            base[0] = spread(frozenset(chosen))

    heap = [(-gain(v), v, 0) for v in range(n)]
    heapq.heapify(heap)
    nodes, gains = [], []
    while len(nodes) < K and heap:
        neg, v, stamp = heapq.heappop(heap)
        if stamp != len(nodes):
            heapq.heappush(heap, (-gain(v), v, len(nodes)))
            continue
        # Rounding can leave a stale bound an ulp under its true gain, so
        # refresh stale rivals that might tie before trusting the tie-break.
        slack = TIE_SLACK * max(1.0, abs(neg))
        rivals = []
        while heap and heap[0][0] <= neg + slack:
            rivals.append(heapq.heappop(heap))
        stale = [r for r in rivals if r[2] != len(nodes)]
        for r in rivals:
            heapq.heappush(heap, r if r[2] == len(nodes) else (-gain(r[1]), r[1], len(nodes)))
        if stale:
            heapq.heappush(heap, (neg, v, stamp))
            continue
        nodes.append(v)
        gains.append(-neg)
        commit(v)
    return InfluencerRanking(component, nodes, gains, rounds if spread is None else 0)


@dataclass
class AppearanceStats:
    fake: dict[int, int]
    true: dict[int, int]

    def percent_fake(self, node: int) -> float | None:
        f, t = self.fake.get(node, 0), self.true.get(node, 0)
        return None if f + t == 0 else 100.0 * f / (f + t)

    def percentages(self, nodes: Iterable[int]) -> list[float]:
        """Relative fake appearance for nodes seen at least once; absent nodes are skipped."""
        out = [self.percent_fake(u) for u in nodes]
        return [x for x in out if x is not None]


def appearance_stats(nodes: Iterable[int], labeled_cascades: Iterable, labels: Sequence[str] | None = None) -> AppearanceStats:
    """Count the fake/true cascades each node engages in.

    Labels come from the cascades themselves unless ``labels`` (e.g. predicted
    ones) is given in the same order.
    """
    want = set(nodes)
    fake = {u: 0 for u in want}
    true = {u: 0 for u in want}
    for i, c in enumerate(labeled_cascades):
        lab = c.label if labels is None else labels[i]
        bucket = fake if lab == "fake" else true if lab == "true" else None
        if bucket is None:
            continue
        for u in set(c.users) & want:
            bucket[u] += 1
    return AppearanceStats(fake, true)


def box_summary(values: Sequence[float]) -> dict[str, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"n": 0}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"n": int(v.size), "min": float(v.min()), "q1": float(q1), "median": float(med),
            "q3": float(q3), "max": float(v.max())}
