"""Node monitoring and edge removal, scored by % reduction in fake-cascade size."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .cascades import Cascade
from .diffusion import DEFAULT_ROUNDS, _incidence, _probs, reach
from .errors import DomainError
from .graph import DirectedGraph
from .influence import InfluencerRanking
from .params import ComponentParams
from .rng import stream

log = logging.getLogger(__name__)


@dataclass
class InterventionReport:
    strategy: str
    K: list[int]
    reduction: list[float]
    n_eval: list[int]
    se: list[float] = field(default_factory=list)

    def rows(self):
        for i, k in enumerate(self.K):
            yield self.strategy, k, self.reduction[i], self.n_eval[i]


def _check_K(K_values: Sequence[int]) -> list[int]:
    K = [int(k) for k in K_values]
    if not K or any(k < 0 for k in K) or any(b <= a for a, b in zip(K, K[1:])):
        raise DomainError("K values must be non-negative and strictly increasing")
    return K


def node_intervention_eval(fake_cascades: Sequence[Cascade], monitored: Sequence[int], K_values: Sequence[int],
                           strategy: str = "mic") -> InterventionReport:
    """A cascade that reaches a monitored user is stopped there.

    Every engagement strictly after the first monitored one counts as
    prevented; the intercepting engagement itself does not.
    """
    if not len(fake_cascades):
        raise DomainError("no fake cascades to evaluate")
    K = _check_K(K_values)
    if len(monitored) < K[-1]:
        log.warning("only %d monitored users for K up to %d", len(monitored), K[-1])
    rank = {}
    for i, u in enumerate(monitored):
        rank.setdefault(u, i)
    # a cascade is cut at K iff some engaged user has monitor rank < K
    per_cascade = []
    for c in fake_cascades:
        ranks = np.array([rank.get(u, math.inf) for u in c.users], dtype=float)
        per_cascade.append((ranks, len(c)))
    reductions, ses = [], []
    for k in K:
        vals = []
        for ranks, size in per_cascade:
            hit = np.flatnonzero(ranks < k)
            vals.append(0.0 if hit.size == 0 else (size - hit[0] - 1) / size)
        vals = np.array(vals) * 100.0
        reductions.append(float(vals.mean()))
        ses.append(float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0)
    return InterventionReport(strategy, K, reductions, [len(per_cascade)] * len(K), ses)


def node_strategy_mic(ranking: InfluencerRanking, K: int | None = None) -> list[int]:
    if not len(ranking):
        raise DomainError("empty influencer ranking")
    if K is not None and K > len(ranking):
        log.warning("K=%d exceeds the %d ranked users, truncated", K, len(ranking))
    return list(ranking.nodes if K is None else ranking.nodes[:K])


def node_strategy_topu(cascades: Sequence[Cascade], predicted: Sequence[str] | None = None,
                       fake_label: str = "fake") -> list[int]:
    """Users by descending engagement count; with ``predicted``, only predicted-fake cascades count."""
    if predicted is not None:
        cascades = [c for c, lab in zip(cascades, predicted) if lab == fake_label]
        if not cascades:
            log.warning("no cascades predicted %r, TopU list is empty", fake_label)
            return []
    elif not len(cascades):
        raise DomainError("no cascades")
    counts = Counter(u for c in cascades for u in c.users)
    return sorted(counts, key=lambda u: (-counts[u], u))


def seed_pool(fake_cascades: Iterable[Cascade]) -> list[int]:
    """First-engagement user of every observed fake cascade (a multiset)."""
    return [c.users[0] for c in fake_cascades]


def edge_intervention_eval(graph: DirectedGraph, fake_params, removed_edges: Sequence[tuple[int, int]],
                           K_values: Sequence[int], rounds: int = DEFAULT_ROUNDS,
                           seeds_source: Sequence[int] | Sequence[Cascade] = (), rng_seed: int = 0,
                           seed_size: int = 1, strategy: str = "mic") -> InterventionReport:
    """Simulated fake-spread reduction from removing the first K edges.

    Each round draws a seed set from ``seeds_source`` and one live-edge sample;
    the with/without-removal sizes reuse that same sample, so a removal can
    only shrink a cascade.
    """
    K = _check_K(K_values)
    if rounds < 1:
        raise DomainError("rounds must be >= 1")
    if len(removed_edges) < K[-1]:
        log.warning("removal list has %d edges, K goes up to %d", len(removed_edges), K[-1])
    pool = list(seeds_source)
    if pool and isinstance(pool[0], Cascade):
        pool = seed_pool(pool)
    if not pool:
        raise DomainError("no seed users to start simulations from")
    pool = np.array(pool, dtype=np.int64)
    try:
        order = np.array([graph.edge_id[(int(u), int(v))] for u, v in removed_edges], dtype=np.int64)
    except KeyError as exc:
        raise DomainError(f"edge {exc.args[0]} is not in the graph") from None
    p = _probs(graph, fake_params)
    rng = stream(rng_seed)
    live = rng.random((rounds, graph.m)) < p
    start = np.zeros((rounds, graph.n), dtype=bool)
    for r in range(rounds):
        start[r, rng.choice(pool, size=min(seed_size, len(pool)), replace=False)] = True
    D = _incidence(graph)
    before = reach(graph, live, start, D).sum(axis=1).astype(float)
    mu_before = before.mean()
    reductions, ses = [], []
    for k in K:
        cut = live.copy()
        cut[:, order[:k]] = False
        after = reach(graph, cut, start, D).sum(axis=1).astype(float)
        diff = before - after
        reductions.append(float(100.0 * diff.mean() / mu_before))
        ses.append(float(100.0 * diff.std(ddof=1) / math.sqrt(rounds) / mu_before) if rounds > 1 else 0.0)
    return InterventionReport(strategy, K, reductions, [rounds] * len(K), ses)


def edge_strategy_mic(fake_params: ComponentParams) -> list[tuple[int, int]]:
    """Edges by descending fake-component probability, ties in (u, v) order."""
    if len(fake_params) == 0:
        return []
    order = np.lexsort((fake_params.dst, fake_params.src, -fake_params.p))
    return [(int(fake_params.src[e]), int(fake_params.dst[e])) for e in order]


def edge_strategy_random(graph: DirectedGraph, rng_seed: int = 0) -> list[tuple[int, int]]:
    perm = stream(rng_seed).permutation(graph.m)
    return [(int(graph.src[e]), int(graph.dst[e])) for e in perm]
