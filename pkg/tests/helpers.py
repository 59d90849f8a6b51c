import json

from cascademix.cascades import parse_cascades
from cascademix.graph import DirectedGraph, NodeIds


def jsonl(*records):
    return "\n".join(json.dumps(r) for r in records)


def make_cascades(spec, nodes=None):
    """``spec`` is ``{cid: [(user, t), ...]}`` with string users."""
    recs = [{"id": cid, "events": [{"u": u, "t": t} for u, t in evs]} for cid, evs in spec.items()]
    return parse_cascades(jsonl(*recs), nodes)


def graph_from(edges, n=None):
    n = n if n is not None else max([max(e) for e in edges] + [-1]) + 1
    return DirectedGraph(NodeIds.range(n), edges, n=n)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE: list[str] = []
