"""Clustering evaluation, diffusion hypothesis tests and live-edge moment estimates."""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .cascades import LABELS, Cascade
from .errors import DomainError
from .inference import PosteriorAssignment
from .params import MixtureParams

log = logging.getLogger(__name__)

# ---------------------------------------------------------------- clustering


def assign_clusters(posterior: PosteriorAssignment) -> tuple[np.ndarray, np.ndarray]:
    """Argmax component per cascade; exact ties go to the lowest index and are flagged."""
    return posterior.labels, posterior.ties


def stratified_holdout(labels: Sequence[str], frac: float = 0.2, rng_seed: int = 0) -> np.ndarray:
    """Indices of a label-stratified random subset (at least one per label)."""
    rng = np.random.default_rng(rng_seed)
    labels = np.asarray(labels, dtype=object)
    picked = []
    for lab in sorted(set(labels.tolist()) - {None}):
        idx = np.flatnonzero(labels == lab)
        take = max(1, int(round(frac * len(idx))))
        picked.extend(rng.choice(idx, size=take, replace=False).tolist())
    return np.sort(np.array(picked, dtype=np.int64))


def map_clusters_to_labels(clusters: Sequence[int], holdout: Mapping[int, str],
                           labels: Sequence[str] = LABELS) -> dict[int, str]:
    """Name each cluster from a small labelled holdout.

    ``holdout`` maps cascade position -> known label. Each cluster takes its
    majority holdout label; when that is not a bijection the bijection with the
    best holdout accuracy wins.
    """
    present = set(holdout.values())
    missing = [lab for lab in labels if lab not in present]
    if missing:
        raise DomainError(f"holdout has no cascades labelled {missing}")
    clusters = np.asarray(clusters)
    ids = list(range(len(labels)))
    votes = {c: Counter() for c in ids}
    for pos, lab in holdout.items():
        votes[int(clusters[pos])][lab] += 1
    majority = {}
    for c, cnt in votes.items():
        top = cnt.most_common(2)
        if top and (len(top) == 1 or top[0][1] > top[1][1]):
            majority[c] = top[0][0]
    if len(majority) == len(ids) and len(set(majority.values())) == len(ids):
        return majority
    best, best_hits = None, -1
    for perm in itertools.permutations(labels):
        hits = sum(votes[c][perm[c]] for c in ids)
        if hits > best_hits:
            best, best_hits = dict(zip(ids, perm)), hits
    return best


def clustering_metrics(predicted: Sequence[str], truth: Sequence[str],
                       pi_hat: Sequence[float] | None = None, labels: Sequence[str] = LABELS,
                       positive: str = "fake") -> dict[str, float]:
    """Accuracy, F1 with ``positive`` as the positive class, and MAE of the mixing weights.

    ``pi_hat`` is ordered like ``labels``; its MAE is against the empirical
    label frequencies of ``truth``.
    """
    if len(predicted) != len(truth):
        raise DomainError(f"{len(predicted)} predictions for {len(truth)} labels")
    if not len(truth):
        raise DomainError("no labels")
    pred = np.asarray(predicted, dtype=object)
    true = np.asarray(truth, dtype=object)
    acc = float(np.mean(pred == true))
    tp = int(np.sum((pred == positive) & (true == positive)))
    fp = int(np.sum((pred == positive) & (true != positive)))
    fn = int(np.sum((pred != positive) & (true == positive)))
    f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    out = {"accuracy": acc, "f1": float(f1)}
    if pi_hat is not None:
        freq = np.array([np.mean(true == lab) for lab in labels])
        out["mae_pi"] = float(np.mean(np.abs(np.asarray(pi_hat, dtype=float) - freq)))
    return out


@dataclass
class ClusterReport:
    cascade_ids: list[str]
    gamma: np.ndarray
    predicted: list[str]
    mapping: dict[int, str]
    truth: list[str | None]
    metrics: dict[str, float] = field(default_factory=dict)
    ties: np.ndarray | None = None


def cluster_report(posterior: PosteriorAssignment, params: MixtureParams, truth: Sequence[str | None],
                   holdout_frac: float = 0.2, rng_seed: int = 0) -> ClusterReport:
    """Cluster, name clusters from a stratified holdout, and score against ``truth``."""
    clusters, ties = assign_clusters(posterior)
    labelled = [i for i, lab in enumerate(truth) if lab is not None]
    hold = stratified_holdout([truth[i] for i in labelled], holdout_frac, rng_seed)
    holdout = {labelled[i]: truth[labelled[i]] for i in hold}
    mapping = map_clusters_to_labels(clusters, holdout)
    predicted = [mapping[int(c)] for c in clusters]
    metrics = {}
    if labelled:
        # pi_hat reordered so entry i belongs to LABELS[i]
        inverse = {lab: c for c, lab in mapping.items()}
        pi_hat = [params.pi[inverse[lab]] for lab in LABELS]
        metrics = clustering_metrics([predicted[i] for i in labelled], [truth[i] for i in labelled], pi_hat)
    return ClusterReport(posterior.cascade_ids, posterior.gamma, predicted, mapping, list(truth), metrics, ties)


def align_components(fitted: MixtureParams, truth: MixtureParams, missing: float = 0.5) -> tuple[int, ...]:
    """Component permutation of ``fitted`` that best matches ``truth`` by edge MAE."""
    best = min(itertools.permutations(range(fitted.k)),
               key=lambda perm: edge_mae(fitted.permuted(perm), truth, missing))
    return best


def _on_truth_edges(fitted: MixtureParams, truth: MixtureParams, missing: float) -> np.ndarray:
    lookup = {e: j for j, e in enumerate(zip(fitted.src.tolist(), fitted.dst.tolist()))}
    out = np.full(truth.theta.shape, float(missing))
    for j, e in enumerate(zip(truth.src.tolist(), truth.dst.tolist())):
        i = lookup.get(e)
        if i is not None:
            out[:, j] = fitted.theta[:, i]
    return out


def edge_mae(fitted: MixtureParams, truth: MixtureParams, missing: float = 0.5) -> float:
    """MAE over every ground-truth edge; edges the fit never saw count as ``missing``."""
    return float(np.mean(np.abs(_on_truth_edges(fitted, truth, missing) - truth.theta)))


def pi_mae(fitted: MixtureParams, truth: MixtureParams) -> float:
    return float(np.mean(np.abs(fitted.pi - truth.pi)))


# ---------------------------------------------------------- hypothesis tests


@dataclass(frozen=True)
class TestResult:
    name: str
    statistic: float
    p: float
    n1: int
    n2: int
    z: float | None = None
    ties: bool = False
    df: float | None = None


def welch_t(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """One-sided Welch t-test of ``mean(a) > mean(b)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n1, n2 = len(a), len(b)
    if n1 < 2 or n2 < 2:
        raise DomainError("each group needs at least 2 samples")
    va, vb = a.var(ddof=1) / n1, b.var(ddof=1) / n2
    if va + vb == 0:
        raise DomainError("t statistic undefined: both groups have zero variance")
    t = (a.mean() - b.mean()) / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va**2 / (n1 - 1) + vb**2 / (n2 - 1))
    return TestResult("welch_t", float(t), float(stats.t.sf(t, df)), n1, n2, df=float(df))


def mean_delays(cascades: Sequence[Cascade]) -> np.ndarray:
    """Mean gap between consecutive engagements, per cascade."""
    out = []
    for c in cascades:
        if len(c) < 2:
            raise DomainError(f"cascade {c.id!r} has fewer than 2 events")
        out.append((c.times[-1] - c.times[0]) / (len(c) - 1))
    return np.array(out)


def temporal_test(fake_cascades: Sequence[Cascade], true_cascades: Sequence[Cascade]) -> TestResult:
    """Welch t-test on log mean inter-engagement delay, H1: fake delays are longer."""
    groups = []
    for name, group in (("fake", fake_cascades), ("true", true_cascades)):
        d = mean_delays(group)
        if np.any(d <= 0):
            log.warning("dropping %d %s cascades with zero mean delay", int(np.sum(d <= 0)), name)
            d = d[d > 0]
        groups.append(np.log(d))
    res = welch_t(*groups)
    return TestResult("temporal_welch_t", res.statistic, res.p, res.n1, res.n2, df=res.df)


def _u_statistic(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(x[:, None] > y[None, :]) + 0.5 * np.sum(x[:, None] == y[None, :]))


EXACT_MAX_N = 12


def structural_test(fake_r: Sequence[float], true_r: Sequence[float], exact: bool | None = None) -> TestResult:
    """One-sided Mann-Whitney U, H1: fake values are stochastically larger.

    ``statistic`` is U for the fake group. With ``n1 + n2 <= 12`` the p-value
    comes from enumerating every split of the pooled sample (ties included);
    otherwise from the tie-corrected normal approximation with continuity
    correction.
    """
    x = np.asarray(fake_r, dtype=float)
    y = np.asarray(true_r, dtype=float)
    n1, n2 = len(x), len(y)
    if n1 == 0 or n2 == 0:
        raise DomainError("both groups must be non-empty")
    n = n1 + n2
    pooled = np.concatenate([x, y])
    counts = np.unique(pooled, return_counts=True)[1]
    ties = bool(np.any(counts > 1))
    u = _u_statistic(x, y)
    mu = n1 * n2 / 2.0
    var = n1 * n2 / 12.0 * ((n + 1) - np.sum(counts**3 - counts) / (n * (n - 1))) if n > 1 else 0.0
    z = (u - mu - 0.5) / math.sqrt(var) if var > 0 else 0.0
    if exact is None:
        exact = n <= EXACT_MAX_N
    if exact:
        hits = total = 0
        for pick in itertools.combinations(range(n), n1):
            mask = np.zeros(n, dtype=bool)
            mask[list(pick)] = True
            total += 1
            hits += _u_statistic(pooled[mask], pooled[~mask]) >= u - 1e-9
        p = hits / total
    else:
        p = float(stats.norm.sf(z)) if var > 0 else 0.5
    return TestResult("mann_whitney_u", u, float(p), n1, n2, z=float(z), ties=ties)


def ecdf(values: Sequence[float]) -> list[tuple[float, float]]:
    v = np.sort(np.asarray(values, dtype=float))
    uniq, last = np.unique(v, return_index=False, return_counts=True)
    return list(zip(uniq.tolist(), (np.cumsum(last) / len(v)).tolist()))


# ------------------------------------------------------ live-edge moments


@dataclass
class CorrelationMatrix:
    """``matrix[j, j']`` estimates ``E[x_j x_j']``; the diagonal is ``E[x_j]``."""

    src: np.ndarray
    dst: np.ndarray
    matrix: np.ndarray
    n_obs: int

    def __call__(self, j: int, jp: int) -> float:
        return float(self.matrix[j, jp])


def pairwise_correlation(observations) -> CorrelationMatrix:
    """Empirical pairwise coordinate means over observed live-edge graphs."""
    obs = list(observations)
    if not obs:
        raise DomainError("need at least one observation")
    ref = obs[0]
    for o in obs[1:]:
        if not (np.array_equal(o.src, ref.src) and np.array_equal(o.dst, ref.dst)):
            raise DomainError("observations are over different edge sets")
    X = np.array([o.live for o in obs], dtype=float)
    return CorrelationMatrix(ref.src, ref.dst, X.T @ X / len(obs), len(obs))


def correlation_closed_form(pi: Sequence[float], theta: np.ndarray) -> np.ndarray:
    """``sum_i pi_i p_i p_i^T`` off the diagonal, ``sum_i pi_i p_i`` on it."""
    pi = np.asarray(pi, dtype=float)
    theta = np.atleast_2d(theta)
    out = np.einsum("i,ij,ik->jk", pi, theta, theta)
    np.fill_diagonal(out, pi @ theta)
    return out


@dataclass
class SampleSizeSpec:
    """Accuracy/confidence for influence recovery, or directly for the moment matrix.

    Give ``eps, delta, m, n`` (and ``k``) to derive the matrix-level targets,
    or give ``eps_matrix, delta_matrix`` directly.
    """

    eps: float | None = None
    delta: float | None = None
    m: int | None = None
    n: int | None = None
    k: int = 2
    eps_matrix: float | None = None
    delta_matrix: float | None = None

    def __post_init__(self):
        if self.eps_matrix is None or self.delta_matrix is None:
            if None in (self.eps, self.delta, self.m, self.n):
                raise DomainError("need eps, delta, m, n or eps_matrix, delta_matrix")
            for name in ("eps", "delta"):
                v = getattr(self, name)
                if not 0 < v < 1:
                    raise DomainError(f"{name}={v} outside (0, 1)")
            if self.m < 2 or self.n < 1:
                raise DomainError("need m >= 2 edges and n >= 1 nodes")
            eps_prime = self.eps / (self.m * self.n)
            self.eps_matrix = (eps_prime**2 / self.m**2) ** (self.k + 1)
            self.delta_matrix = 2 * self.delta / (self.m * (self.m - 1))
        for name in ("eps_matrix", "delta_matrix"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise DomainError(f"{name}={v} outside (0, 1)")

    def complexity(self) -> float:
        """Order-of-magnitude total ``(n^4 m^8 / eps^4)^(k+1) ln(m / delta)``; needs the raw inputs."""
        if None in (self.eps, self.delta, self.m, self.n):
            raise DomainError("complexity needs eps, delta, m, n")
        return (self.n**4 * self.m**8 / self.eps**4) ** (self.k + 1) * math.log(self.m / self.delta)


def chernoff_samples(eps_matrix: float, delta_matrix: float) -> int:
    """Samples so a Bernoulli mean is within ``eps_matrix`` w.p. ``1 - delta_matrix``."""
    if not (0 < eps_matrix < 1 and 0 < delta_matrix < 1):
        raise DomainError("eps_matrix and delta_matrix must lie in (0, 1)")
    bound = (2 + eps_matrix) / eps_matrix**2 * math.log(2 / delta_matrix)
    if not math.isfinite(bound):
        raise DomainError("sample bound overflows a double")
    return math.ceil(bound)


def required_samples(spec: SampleSizeSpec) -> int:
    return chernoff_samples(spec.eps_matrix, spec.delta_matrix)
