"""Cascade data model, JSONL ingestion and the windowed activation index.

A cascade is a time-ordered list of first engagements. Inference never sees
the true diffusion graph, so potential parents are taken from a lookback
window: in ``time`` mode any user activated in ``[t_v - W, t_v)``, in
``events`` mode the ``W`` activations immediately before ``v``. The
candidate-edge index collects every ``(u, v)`` that ever co-occurs this way,
with its success cascades ``A[u, v]`` and failure cascades ``B[u, v]``.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import DomainError, ParseError
from .graph import DirectedGraph, NodeIds

LABELS = ("true", "fake")


@dataclass(frozen=True)
class Cascade:
    id: str
    users: tuple[int, ...]
    times: tuple[float, ...]
    label: str | None = None

    def __post_init__(self):
        if not self.users:
            raise DomainError(f"cascade {self.id!r} has no events")
        if len(self.users) != len(self.times):
            raise DomainError("users and times differ in length")

    def __len__(self) -> int:
        return len(self.users)

    @property
    def seeds(self) -> tuple[int, ...]:
        t0 = self.times[0]
        return tuple(u for u, t in zip(self.users, self.times) if t == t0)

    def activation_times(self) -> dict[int, float]:
        return dict(zip(self.users, self.times))

    @classmethod
    def from_events(cls, id: str, events: Iterable[tuple[int, float]], label: str | None = None) -> "Cascade":
        """Sort by time (stable, so ties keep input order) and keep first engagements."""
        ordered = sorted(events, key=lambda ev: ev[1])
        seen = set()
        users, times = [], []
        for u, t in ordered:
            if u in seen:
                continue
            seen.add(u)
            users.append(int(u))
            times.append(float(t))
        return cls(id, tuple(users), tuple(times), label)


@dataclass
class CascadeSet:
    """Cascades sharing one node-id space."""

    cascades: list[Cascade]
    nodes: NodeIds = field(default_factory=NodeIds)

    def __len__(self) -> int:
        return len(self.cascades)

    def __iter__(self) -> Iterator[Cascade]:
        return iter(self.cascades)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return CascadeSet(self.cascades[i], self.nodes)
        return self.cascades[i]

    def subset(self, idx: Iterable[int]) -> "CascadeSet":
        return CascadeSet([self.cascades[i] for i in idx], self.nodes)

    @property
    def labels(self) -> list[str | None]:
        return [c.label for c in self.cascades]

    @property
    def ids(self) -> list[str]:
        return [c.id for c in self.cascades]


def parse_cascades(
    source: str | Iterable[str],
    nodes: NodeIds | None = None,
    time_scale: float = 1.0,
) -> CascadeSet:
    """Read one JSON object per line: ``{"id", "label"?, "events": [{"u", "t"}]}``.

    ``time_scale`` multiplies raw timestamps (e.g. ``1/3600`` for seconds -> hours).
    """
    nodes = NodeIds() if nodes is None else nodes
    lines = source.splitlines() if isinstance(source, str) else source
    out = []
    for recno, raw in enumerate(lines, 1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", recno) from None
        if not isinstance(rec, dict):
            raise ParseError("record is not an object", recno)
        for key in ("id", "events"):
            if key not in rec:
                raise ParseError(f"missing field {key!r}", recno)
        label = rec.get("label")
        if label is not None and label not in LABELS + ("unknown",):
            raise ParseError(f"unknown label {label!r}", recno)
        if label == "unknown":
            label = None
        if not isinstance(rec["events"], list) or not rec["events"]:
            raise ParseError("events must be a non-empty array", recno)
        events = []
        for ev in rec["events"]:
            if not isinstance(ev, dict) or "u" not in ev or "t" not in ev:
                raise ParseError("event needs fields 'u' and 't'", recno)
            t = float(ev["t"])
            if not t >= 0:
                raise DomainError(f"record {recno}: negative or NaN timestamp {ev['t']!r}")
            events.append((nodes.intern(str(ev["u"])), t * time_scale))
        out.append(Cascade.from_events(str(rec["id"]), events, label))
    return CascadeSet(out, nodes)


def dump_cascades(cascades: CascadeSet) -> str:
    name = cascades.nodes.name
    lines = []
    for c in cascades:
        rec = {"id": c.id}
        if c.label is not None:
            rec["label"] = c.label
        rec["events"] = [{"u": name(u), "t": t} for u, t in zip(c.users, c.times)]
        lines.append(json.dumps(rec, separators=(",", ":")) + "\n")
    return "".join(lines)


def filter_min_engagements(cascades: CascadeSet, k_min: int = 5) -> tuple[CascadeSet, set[int]]:
    """Drop users seen in fewer than ``k_min`` cascades, then drop emptied cascades."""
    if k_min < 1:
        raise DomainError("k_min must be >= 1")
    counts = Counter(u for c in cascades for u in c.users)
    keep = {u for u, n in counts.items() if n >= k_min}
    out = []
    for c in cascades:
        pairs = [(u, t) for u, t in zip(c.users, c.times) if u in keep]
        if pairs:
            users, times = zip(*pairs)
            out.append(Cascade(c.id, users, times, c.label))
    return CascadeSet(out, cascades.nodes), keep


@dataclass(frozen=True)
class Window:
    mode: str = "events"
    size: float = 10

    def __post_init__(self):
        if self.mode not in ("time", "events"):
            raise DomainError(f"window mode must be 'time' or 'events', not {self.mode!r}")
        if not self.size > 0:
            raise DomainError("window size must be positive")

    @classmethod
    def parse(cls, text: str) -> "Window":
        mode, _, size = text.partition(":")
        if not size:
            raise DomainError(f"window spec {text!r} is not MODE:SIZE")
        value = float(size)
        if mode == "events" and math.isfinite(value):
            value = int(value)
        return cls(mode, value)

    def __str__(self) -> str:
        return f"{self.mode}:{self.size}"

    def to_dict(self) -> dict:
        return {"mode": self.mode, "size": self.size if math.isfinite(self.size) else "inf"}

    @classmethod
    def from_dict(cls, d: dict) -> "Window":
        return cls(d["mode"], float(d["size"]) if d["size"] == "inf" else d["size"])


class ActivationIndex:
    """Flat, read-only arrays over every activation of every cascade.

    Activation ``a`` belongs to cascade ``act_cascade[a]``, is user
    ``act_user[a]`` at ``act_time[a]`` and position ``act_pos[a]``. Its
    potential parents are activations ``parent_act[parent_ptr[a]:parent_ptr[a+1]]``.
    """

    def __init__(self, cascades: CascadeSet, window: Window = Window(), skeleton: DirectedGraph | None = None):
        self.cascades = cascades
        self.window = window
        self.skeleton = skeleton
        self.n_nodes = max(len(cascades.nodes), skeleton.n if skeleton is not None else 0)
        sizes = np.array([len(c) for c in cascades], dtype=np.int64)
        self.cascade_ptr = np.concatenate([[0], np.cumsum(sizes)])
        n_act = int(self.cascade_ptr[-1])
        self.act_cascade = np.repeat(np.arange(len(cascades)), sizes)
        self.act_user = np.fromiter((u for c in cascades for u in c.users), np.int64, n_act)
        self.act_time = np.fromiter((t for c in cascades for t in c.times), float, n_act)
        self.act_pos = np.arange(n_act) - self.cascade_ptr[self.act_cascade]
        self.is_seed = np.zeros(n_act, dtype=bool)

        lo = np.empty(n_act, dtype=np.int64)
        hi = np.empty(n_act, dtype=np.int64)
        W = window.size
        for s, c in enumerate(cascades):
            a0, a1 = self.cascade_ptr[s], self.cascade_ptr[s + 1]
            t = self.act_time[a0:a1]
            seed = t == t[0]
            self.is_seed[a0:a1] = seed
            if window.mode == "time":
                l = np.searchsorted(t, t - W, side="left")
                h = np.searchsorted(t, t, side="left")
            else:
                pos = np.arange(a1 - a0)
                l = np.maximum(0, pos - W) if math.isfinite(W) else np.zeros_like(pos)
                h = pos
            h = np.where(seed, l, h)
            lo[a0:a1] = l + a0
            hi[a0:a1] = h + a0
        counts = np.maximum(hi - lo, 0)
        starts = np.concatenate([[0], np.cumsum(counts)])
        parent_act = np.arange(starts[-1]) - np.repeat(starts[:-1], counts) + np.repeat(lo, counts)
        child_act = np.repeat(np.arange(n_act), counts)
        if skeleton is not None:
            codes = self.act_user[parent_act] * self.n_nodes + self.act_user[child_act]
            allowed = np.sort(skeleton.src * self.n_nodes + skeleton.dst)
            ok = np.isin(codes, allowed)
            parent_act, child_act = parent_act[ok], child_act[ok]
            counts = np.bincount(child_act, minlength=n_act)
            starts = np.concatenate([[0], np.cumsum(counts)])
        self.parent_ptr = starts
        self.parent_act = parent_act
        self.child_act = child_act
        # activations explained by nothing in the window are exogenous, like seeds
        self.is_root = self.is_seed | (counts == 0)
        for a in (self.act_cascade, self.act_user, self.act_time, self.act_pos, self.is_seed,
                  self.parent_ptr, self.parent_act, self.child_act, self.is_root, self.cascade_ptr):
            a.setflags(write=False)
        self._lookup: list[dict[int, int]] | None = None

    @property
    def n_activations(self) -> int:
        return len(self.act_user)

    def activation(self, s: int, user: int) -> int | None:
        if self._lookup is None:
            self._lookup = [
                {int(u): int(a) for a, u in enumerate(self.act_user[p0:p1].tolist(), p0)}
                for p0, p1 in zip(self.cascade_ptr[:-1].tolist(), self.cascade_ptr[1:].tolist())
            ]
        return self._lookup[s].get(user)

    def parents(self, s: int, user: int) -> list[int]:
        a = self.activation(s, user)
        if a is None:
            raise DomainError(f"user {user} is not active in cascade {s}")
        return self.act_user[self.parent_act[self.parent_ptr[a]:self.parent_ptr[a + 1]]].tolist()

    def seeds(self, s: int) -> list[int]:
        p0, p1 = self.cascade_ptr[s], self.cascade_ptr[s + 1]
        return self.act_user[p0:p1][self.is_seed[p0:p1]].tolist()


def index_cascades(cascades: CascadeSet, window: Window = Window(), skeleton: DirectedGraph | None = None) -> ActivationIndex:
    return ActivationIndex(cascades, window, skeleton)


class CandidateEdgeIndex:
    """Candidate edges with per-edge success (A) and failure (B) evidence.

    ``entry_edge[j]`` is the edge of parent entry ``j`` of the activation
    index; ``fail_cascade[i], fail_edge[i]`` enumerate the ``(s, e)`` pairs
    with ``s`` in ``B[e]``.
    """

    def __init__(self, index: ActivationIndex):
        self.index = index
        N = index.n_nodes
        pu = index.act_user[index.parent_act]
        cv = index.act_user[index.child_act]
        codes = pu * N + cv
        if index.skeleton is not None:
            edge_codes = index.skeleton.src * N + index.skeleton.dst
        else:
            edge_codes = np.unique(codes)
        fail_c, fail_e = self._failures(edge_codes)
        evidenced = np.zeros(len(edge_codes), dtype=bool)
        order = np.argsort(edge_codes, kind="stable")
        sorted_codes = edge_codes[order]
        entry_edge = order[np.searchsorted(sorted_codes, codes)] if len(codes) else np.zeros(0, np.int64)
        evidenced[entry_edge] = True
        evidenced[fail_e] = True
        # drop skeleton edges that no cascade says anything about
        remap = np.cumsum(evidenced) - 1
        self.src = (edge_codes[evidenced] // N).astype(np.int64)
        self.dst = (edge_codes[evidenced] % N).astype(np.int64)
        self.entry_edge = remap[entry_edge].astype(np.int64)
        self.fail_cascade = fail_c
        self.fail_edge = remap[fail_e].astype(np.int64)
        self.edge_id = {(u, v): e for e, (u, v) in enumerate(zip(self.src.tolist(), self.dst.tolist()))}
        for a in (self.src, self.dst, self.entry_edge, self.fail_cascade, self.fail_edge):
            a.setflags(write=False)

    def _failures(self, edge_codes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """All (cascade, edge) pairs where the tail fired and the head stayed inactive past the window."""
        idx = self.index
        N = idx.n_nodes
        src, dst = edge_codes // N, edge_codes % N
        order = np.argsort(src, kind="stable")
        ptr = np.concatenate([[0], np.cumsum(np.bincount(src, minlength=N))])
        u = idx.act_user
        deg = ptr[u + 1] - ptr[u]
        cand_act = np.repeat(np.arange(idx.n_activations), deg)
        starts = np.concatenate([[0], np.cumsum(deg)])
        cand_edge = order[np.arange(starts[-1]) - np.repeat(starts[:-1], deg) + np.repeat(ptr[u], deg)]
        s = idx.act_cascade[cand_act]
        keys = s * N + dst[cand_edge]
        act_keys = idx.act_cascade * N + idx.act_user
        key_order = np.argsort(act_keys, kind="stable")
        sorted_keys = act_keys[key_order]
        loc = np.searchsorted(sorted_keys, keys)
        loc_c = np.minimum(loc, len(sorted_keys) - 1)
        found = sorted_keys[loc_c] == keys
        head = key_order[loc_c]
        if idx.window.mode == "time":
            late = idx.act_time[head] > idx.act_time[cand_act] + idx.window.size
        else:
            late = idx.act_pos[head] > idx.act_pos[cand_act] + idx.window.size
        fail = ~found | late
        return s[fail].astype(np.int64), cand_edge[fail].astype(np.int64)

    @property
    def m(self) -> int:
        return len(self.src)

    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist()))

    def _ids(self, cascade_ordinals) -> frozenset[str]:
        ids = self.index.cascades.ids
        return frozenset(ids[s] for s in cascade_ordinals)

    def A(self, u: int, v: int) -> frozenset[str]:
        e = self.edge_id.get((u, v))
        if e is None:
            return frozenset()
        return self._ids(self.index.act_cascade[self.index.child_act[self.entry_edge == e]].tolist())

    def B(self, u: int, v: int) -> frozenset[str]:
        e = self.edge_id.get((u, v))
        if e is None:
            return failure_cascades(self.index, u, v)
        return self._ids(self.fail_cascade[self.fail_edge == e].tolist())

    def children(self, u: int) -> list[int]:
        return self.dst[self.src == u].tolist()

    def parents_of(self, v: int) -> list[int]:
        return self.src[self.dst == v].tolist()


def failure_cascades(index: ActivationIndex, u: int, v: int) -> frozenset[str]:
    """``B[u, v]`` for an arbitrary pair, whether or not it is a candidate edge."""
    out = []
    W = index.window.size
    for s, c in enumerate(index.cascades):
        a = index.activation(s, u)
        if a is None:
            continue
        b = index.activation(s, v)
        if b is None:
            out.append(c.id)
        elif index.window.mode == "time" and index.act_time[b] > index.act_time[a] + W:
            out.append(c.id)
        elif index.window.mode == "events" and index.act_pos[b] > index.act_pos[a] + W:
            out.append(c.id)
    return frozenset(out)


def derive_candidate_edges(index: ActivationIndex) -> CandidateEdgeIndex:
    return CandidateEdgeIndex(index)
