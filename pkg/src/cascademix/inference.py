"""EM estimation of a mixture of Independent Cascade models from unlabeled cascades.

Per component ``M`` the log-likelihood of cascade ``s`` is

    sum over non-root activations v of  log(1 - prod_{u in parents(v)} (1 - p[M, u, v]))
  + sum over failure pairs (s in B[u, v])  of  log(1 - p[M, u, v])

Seeds, and activations with no potential parent in the window, are exogenous
and contribute nothing. The M-step splits the credit for each activation
among its parents in proportion to ``p[u, v] / p_s(v)``, which makes the
update an exact EM step for this likelihood.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .cascades import ActivationIndex, CandidateEdgeIndex, CascadeSet, Window, derive_candidate_edges, index_cascades
from .errors import DomainError
from .params import MixtureParams
from .rng import stream

log = logging.getLogger(__name__)

EPS_P = 1e-6


@dataclass(frozen=True)
class EMConfig:
    k: int = 2
    max_iters: int = 200
    tol: float = 0.01
    restarts: int = 5
    init_seed: int = 0
    eps: float = EPS_P
    tied: bool = False
    symmetric_init: bool = False
    pi_init: tuple[float, float] = (0.25, 0.75)
    p_init: tuple[float, float] = (0.05, 0.95)


class CascadeLikelihood:
    """Vectorised likelihood terms over a candidate-edge index.

    ``columns`` maps candidate edge ``e`` to a column of the parameter matrix;
    by default column ``e``.
    """

    def __init__(self, candidates: CandidateEdgeIndex, columns: np.ndarray | None = None):
        idx = candidates.index
        self.candidates = candidates
        self.n_cascades = len(idx.cascades)
        self.n_act = idx.n_activations
        cols = np.arange(candidates.m) if columns is None else np.asarray(columns)
        self.entry_col = cols[candidates.entry_edge]
        self.entry_child = idx.child_act
        self.entry_cascade = idx.act_cascade[idx.child_act]
        self.fail_col = cols[candidates.fail_edge]
        self.fail_cascade = candidates.fail_cascade
        self.nonroot = np.flatnonzero(~idx.is_root)
        self.nonroot_cascade = idx.act_cascade[self.nonroot]

    def activation_probs(self, theta: np.ndarray) -> np.ndarray:
        """``(k, n_act)`` probability that each activation happened; 0 for roots."""
        out = np.empty((theta.shape[0], self.n_act))
        for M in range(theta.shape[0]):
            with np.errstate(divide="ignore"):
                logq = np.bincount(self.entry_child, np.log1p(-theta[M, self.entry_col]), minlength=self.n_act)
            out[M] = -np.expm1(logq)
        return out

    def loglik(self, theta: np.ndarray, p_act: np.ndarray | None = None) -> np.ndarray:
        """``(k, n_cascades)`` per-component cascade log-likelihoods."""
        p_act = self.activation_probs(theta) if p_act is None else p_act
        out = np.empty((theta.shape[0], self.n_cascades))
        for M in range(theta.shape[0]):
            with np.errstate(divide="ignore"):
                act = np.log(p_act[M, self.nonroot])
                fail = np.log1p(-theta[M, self.fail_col])
            out[M] = np.bincount(self.nonroot_cascade, act, minlength=self.n_cascades)
            out[M] += np.bincount(self.fail_cascade, fail, minlength=self.n_cascades)
        return out

    def expected_counts(self, theta: np.ndarray, gamma: np.ndarray, p_act: np.ndarray | None = None,
                        m: int | None = None):
        """Per-edge expected successes and attempts, weighted by responsibilities.

        ``gamma`` is ``(n_cascades, k)``. Returns ``(num, den)``, each ``(k, m)``.
        """
        p_act = self.activation_probs(theta) if p_act is None else p_act
        m = theta.shape[1] if m is None else m
        k = theta.shape[0]
        num = np.empty((k, m))
        den = np.empty((k, m))
        for M in range(k):
            g = gamma[self.entry_cascade, M]
            credit = theta[M, self.entry_col] / p_act[M, self.entry_child]
            num[M] = np.bincount(self.entry_col, g * credit, minlength=m)
            den[M] = np.bincount(self.entry_col, g, minlength=m)
            den[M] += np.bincount(self.fail_col, gamma[self.fail_cascade, M], minlength=m)
        return num, den


def mixture_loglik(pi: np.ndarray, ll: np.ndarray) -> np.ndarray:
    """``log sum_M pi_M exp(ll[M, s])`` per cascade, by max subtraction."""
    with np.errstate(divide="ignore"):
        a = np.log(pi)[:, None] + ll
    top = a.max(axis=0)
    safe = np.where(np.isfinite(top), top, 0.0)
    return safe + np.log(np.exp(a - safe).sum(axis=0))


@dataclass
class PosteriorAssignment:
    """Responsibilities ``gamma[s, M]`` and the argmax cluster per cascade."""

    gamma: np.ndarray
    cascade_ids: list[str]
    degenerate: np.ndarray | None = None

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.gamma, axis=1)

    @property
    def ties(self) -> np.ndarray:
        top = self.gamma.max(axis=1, keepdims=True)
        return (self.gamma == top).sum(axis=1) > 1


@dataclass
class EMState:
    candidates: CandidateEdgeIndex
    params: MixtureParams
    config: EMConfig = EMConfig()
    loglik: np.ndarray | None = None
    iteration: int = 0
    nll_trace: list[float] = field(default_factory=list)
    q_trace: list[float] = field(default_factory=list)
    converged: bool = False
    warnings: list[str] = field(default_factory=list)
    _lik: CascadeLikelihood | None = field(default=None, repr=False)

    @property
    def lik(self) -> CascadeLikelihood:
        if self._lik is None:
            self._lik = CascadeLikelihood(self.candidates)
        return self._lik

    @property
    def index(self) -> ActivationIndex:
        return self.candidates.index

    def refresh(self) -> np.ndarray:
        self.loglik = self.lik.loglik(self.params.theta)
        return self.loglik

    @property
    def nll(self) -> float:
        """Observed-data negative log-likelihood per cascade at the current parameters."""
        ll = self.refresh() if self.loglik is None else self.loglik
        return float(-mixture_loglik(self.params.pi, ll).mean())


def _component(state: EMState, component) -> int:
    return state.params.names.index(component) if isinstance(component, str) else int(component)


def _cascade(state: EMState, s) -> int:
    return state.index.cascades.ids.index(s) if isinstance(s, str) else int(s)


def activation_probability(v: int, s, component, state: EMState) -> float:
    """``1 - prod (1 - p[u, v])`` over the windowed parents of ``v`` in cascade ``s``."""
    s, M = _cascade(state, s), _component(state, component)
    idx = state.index
    a = idx.activation(s, v)
    if a is None:
        raise DomainError(f"user {v} is not active in cascade {s}")
    if idx.is_seed[a]:
        raise DomainError(f"user {v} is a seed of cascade {s}")
    cand = state.candidates
    q = 1.0
    for u in idx.parents(s, v):
        q *= 1.0 - state.params.theta[M, cand.edge_id[(u, v)]]
    return 1.0 - q


def cascade_log_likelihood(s, component, state: EMState) -> float:
    s, M = _cascade(state, s), _component(state, component)
    ll = state.lik.loglik(state.params.theta[M:M + 1])
    return float(ll[0, s])


def e_step(state: EMState) -> PosteriorAssignment:
    ll = state.refresh()
    with np.errstate(divide="ignore"):
        a = np.log(state.params.pi)[:, None] + ll
    top = a.max(axis=0)
    bad = ~np.isfinite(top)
    gamma = np.exp(a - np.where(bad, 0.0, top))
    with np.errstate(invalid="ignore"):
        gamma /= gamma.sum(axis=0)
    if bad.any():
        gamma[:, bad] = state.params.pi[:, None]
        state.warnings.append(f"{int(bad.sum())} cascades have zero likelihood under every component")
    return PosteriorAssignment(gamma.T.copy(), state.index.cascades.ids, bad)


def _clamp(p: np.ndarray, eps: float) -> np.ndarray:
    return np.clip(p, eps, 1.0 - eps)


def m_step(state: EMState, posterior: PosteriorAssignment) -> MixtureParams:
    cfg = state.config
    old = state.params
    gamma = posterior.gamma
    pi = gamma.mean(axis=0)
    pi = pi / pi.sum()
    num, den = state.lik.expected_counts(old.theta, gamma)
    if cfg.tied:
        tot_num, tot_den = num.sum(axis=1), den.sum(axis=1)
        theta = old.theta.copy()
        for M in range(old.k):
            if tot_den[M] > 0:
                theta[M] = tot_num[M] / tot_den[M]
            else:
                state.warnings.append(f"component {M}: no responsibility mass, parameter kept")
    else:
        empty = den <= 0
        with np.errstate(invalid="ignore", divide="ignore"):
            theta = np.where(empty, old.theta, num / np.where(empty, 1.0, den))
        if empty.any():
            state.warnings.append(f"{int(empty.sum())} edge updates had no responsibility mass, kept previous value")
    theta = _clamp(theta, cfg.eps)
    return MixtureParams(pi, theta, old.src, old.dst, old.nodes, old.names, dict(old.meta))


def init_params(candidates: CandidateEdgeIndex, config: EMConfig, restart: int = 0) -> MixtureParams:
    k, m = config.k, candidates.m
    rng_pi = stream(config.init_seed, restart, 0)
    lo, hi = config.pi_init
    if k == 2:
        t = rng_pi.uniform(lo, hi)
        pi = np.array([t, 1.0 - t])
    else:
        w = rng_pi.uniform(lo, hi, size=k)
        pi = w / w.sum()
    lo, hi = config.p_init
    width = 1 if config.tied else m
    rows = []
    for M in range(k):
        # one stream per component so component draws never coincide
        key = 1 if config.symmetric_init else M + 1
        row = stream(config.init_seed, restart, key).uniform(lo, hi, size=width)
        rows.append(np.broadcast_to(row, (m,)).copy())
    theta = _clamp(np.array(rows).reshape(k, m), config.eps)
    if config.symmetric_init:
        pi = np.full(k, 1.0 / k)
    return MixtureParams(pi, theta, candidates.src.copy(), candidates.dst.copy(),
                         candidates.index.cascades.nodes, meta={"window": candidates.index.window.to_dict()})


def run_em(candidates: CandidateEdgeIndex, init: MixtureParams, config: EMConfig) -> tuple[PosteriorAssignment, EMState]:
    state = EMState(candidates, init, config)
    posterior = None
    for it in range(config.max_iters):
        posterior = e_step(state)
        nll = float(-mixture_loglik(state.params.pi, state.loglik).mean())
        state.nll_trace.append(nll)
        with np.errstate(divide="ignore"):
            logpi = np.log(state.params.pi)
        state.q_trace.append(float(np.nansum(posterior.gamma.T * (logpi[:, None] + state.loglik))))
        state.iteration = it + 1
        if it > 0 and abs(state.nll_trace[-2] - nll) < config.tol:
            state.converged = True
            break
        if it == config.max_iters - 1:
            break
        state.params = m_step(state, posterior)
    if not state.converged:
        state.warnings.append(f"no convergence within {config.max_iters} iterations")
    state.params.meta.update(converged=state.converged, nll_trace=list(state.nll_trace))
    return posterior, state


def fit(candidates: CandidateEdgeIndex, config: EMConfig = EMConfig(),
        init: MixtureParams | None = None) -> tuple[MixtureParams, PosteriorAssignment, EMState]:
    """Fit the mixture; keep the restart with the lowest final NLL per cascade.

    With ``init`` given, exactly one run starts from it.
    """
    if len(candidates.index.cascades) < 2:
        raise DomainError("need at least 2 cascades")
    if candidates.m == 0:
        raise DomainError("candidate edge index is empty")
    starts = [init] if init is not None else [init_params(candidates, config, r) for r in range(max(1, config.restarts))]
    best = None
    for r, start in enumerate(starts):
        posterior, state = run_em(candidates, start, config)
        log.debug("restart %d: nll=%.6f iters=%d converged=%s", r, state.nll_trace[-1], state.iteration, state.converged)
        if best is None or state.nll_trace[-1] < best[2].nll_trace[-1]:
            best = (state.params, posterior, state)
    return best


def fit_hic(candidates: CandidateEdgeIndex, config: EMConfig = EMConfig(),
            init: MixtureParams | None = None) -> tuple[MixtureParams, PosteriorAssignment, EMState]:
    """Homogeneous variant: one shared probability per component over all edges."""
    if len(candidates.index.cascades) < 2:
        state = EMState(candidates, init or init_params(candidates, replace(config, tied=True)), replace(config, tied=True))
        state.warnings.append("fewer than 2 cascades, returning the initial parameters")
        return state.params, e_step(state), state
    return fit(candidates, replace(config, tied=True), init)


def fit_cascades(cascades: CascadeSet, window: Window = Window(), config: EMConfig = EMConfig(), skeleton=None):
    cand = derive_candidate_edges(index_cascades(cascades, window, skeleton))
    return fit(cand, config)


def _model_candidates(cascades: CascadeSet, params: MixtureParams, window: Window | None):
    if window is None:
        window = Window.from_dict(params.meta["window"]) if "window" in params.meta else Window()
    cand = derive_candidate_edges(index_cascades(cascades, window, params.skeleton()))
    lookup = {(u, v): j for j, (u, v) in enumerate(zip(params.src.tolist(), params.dst.tolist()))}
    cols = np.array([lookup[e] for e in cand.edges()], dtype=np.int64)
    return cand, cols


def cascade_logliks(cascades: CascadeSet, params: MixtureParams, window: Window | None = None) -> np.ndarray:
    """``(k, n)`` component log-likelihoods of cascades under a fitted model's edge set."""
    cand, cols = _model_candidates(cascades, params, window)
    return CascadeLikelihood(cand, cols).loglik(params.theta)


def posterior(cascades: CascadeSet, params: MixtureParams, window: Window | None = None) -> PosteriorAssignment:
    ll = cascade_logliks(cascades, params, window)
    with np.errstate(divide="ignore"):
        a = np.log(params.pi)[:, None] + ll
    g = np.exp(a - mixture_loglik(params.pi, ll))
    g /= g.sum(axis=0)
    return PosteriorAssignment(g.T.copy(), cascades.ids)


def heldout_nll(cascades: CascadeSet, params: MixtureParams, window: Window | None = None) -> float:
    """Mean of ``-log sum_M pi_M P(s; theta_M)`` over held-out cascades."""
    if len(cascades) == 0:
        raise DomainError("held-out set is empty")
    ll = cascade_logliks(cascades, params, window)
    return float(-mixture_loglik(params.pi, ll).mean())
