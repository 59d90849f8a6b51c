"""``cascademix`` command line: generate, infer, cluster, stats, influencers, intervene, dump."""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import cluster_report, ecdf, structural_test, temporal_test
from .cascades import CascadeSet, Window, derive_candidate_edges, dump_cascades, filter_min_engagements, index_cascades, parse_cascades
from .diffusion import DEFAULT_MIXTURES, generate_synthetic_benchmark
from .errors import DomainError, ParseError
from .graph import NodeIds, build_retweet_graph, dump_edge_list, load_edge_list, weak_component_stats
from .inference import EMConfig, fit, fit_hic, posterior
from .influence import greedy_influencers
from .intervention import (edge_intervention_eval, edge_strategy_mic, edge_strategy_random, node_intervention_eval,
                           node_strategy_mic, node_strategy_topu)
from .params import load_model, save_model
from .reports import (write_cluster_report, write_csv, write_ecdf, write_influencers, write_interventions,
                      write_stats_report)
from .rng import default_seed

log = logging.getLogger("cascademix")

SUBCOMMANDS = ("generate", "infer", "cluster", "stats", "influencers", "intervene", "dump")


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of flag defaults; flags on the command line win")
    p.add_argument("--cascades", metavar="PATH")
    p.add_argument("--followers", metavar="PATH")
    p.add_argument("--model", metavar="PATH")
    p.add_argument("--graph", metavar="PATH", help="known diffusion skeleton (u<TAB>v) to restrict candidate edges")
    p.add_argument("--window", default="events:10", help="events:N or time:HOURS")
    p.add_argument("--tol", type=float, default=0.01)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--rounds", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None, help="master seed (default: $CASCADEMIX_SEED or 0)")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--force", action="store_true", help="allow writing into a non-empty output directory")
    p.add_argument("--time-scale", type=float, default=1.0, help="multiply input timestamps (1/3600 for seconds)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cascademix", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}")

    p = sub.add_parser("generate", help="synthetic benchmark bundle")
    _common(p)
    p.add_argument("--nodes", type=int, default=512)
    p.add_argument("--edges", type=int, default=1024)
    p.add_argument("--mixtures", default=";".join(",".join(map(str, m)) for m in DEFAULT_MIXTURES))
    p.add_argument("--sizes", default="100")

    p = sub.add_parser("infer", help="fit the mixture model by EM")
    _common(p)
    p.add_argument("--hic", action="store_true", help="tie all edge parameters within a component")
    p.add_argument("--min-engagements", type=int, default=1)

    p = sub.add_parser("cluster", help="posterior clustering and label mapping")
    _common(p)
    p.add_argument("--holdout-frac", type=float, default=0.2)

    p = sub.add_parser("stats", help="temporal and structural hypothesis tests")
    _common(p)

    p = sub.add_parser("influencers", help="lazy greedy influential users per component")
    _common(p)
    p.add_argument("--top", type=int, default=100)

    p = sub.add_parser("intervene", help="node and edge intervention evaluation")
    _common(p)
    p.add_argument("--K", default="1,5,10,20")
    p.add_argument("--fake-component", default="fake")
    p.add_argument("--cluster-report", metavar="PATH", help="use predicted labels from a cluster_report.csv")

    p = sub.add_parser("dump", help="re-emit a cascade file in canonical form")
    _common(p)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            defaults = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        sp = parser._subparsers._group_actions[0].choices[args.subcommand]
        known = {a.dest for a in sp._actions}
        unknown = set(defaults) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        sp.set_defaults(**{k.replace("-", "_"): v for k, v in defaults.items()})
        args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = default_seed()
    return args


def _resolve(path: str | None, what: str, required: bool = True) -> Path | None:
    if path is None:
        if required:
            raise UsageError(f"--{what} is required")
        return None
    p = Path(path).resolve()
    if not p.exists():
        raise UsageError(f"--{what} {path}: no such file")
    return p


def _prepare_out(args) -> Path:
    if not args.out:
        raise UsageError("--out is required")
    out = Path(args.out).resolve()
    if out.exists() and any(out.iterdir()) and not args.force:
        raise UsageError(f"output directory {out} is not empty (use --force)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_cascades(args, nodes: NodeIds | None = None) -> CascadeSet:
    path = _resolve(args.cascades, "cascades")
    with path.open() as fh:
        return parse_cascades(fh, nodes, args.time_scale)


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _mix_tag(pi) -> str:
    return "-".join(f"{x:.2f}" for x in pi)


def cmd_generate(args, out: Path) -> dict:
    mixtures = [tuple(_parse_floats(m)) for m in args.mixtures.split(";") if m.strip()]
    sizes = [int(x) for x in args.sizes.split(",")]
    bench = generate_synthetic_benchmark(args.nodes, args.edges, mixtures, sizes, args.seed)
    (out / "graph.tsv").write_text(dump_edge_list(bench.graph))
    files = {"graph": "graph.tsv", "truth": {}, "cascades": {}}
    for pi in bench.mixtures:
        tag = _mix_tag(pi)
        save_model(bench.truth(pi), out / f"truth_{tag}.json")
        files["truth"][tag] = f"truth_{tag}.json"
        for size in sizes:
            name = f"cascades_{tag}_n{size}.jsonl"
            (out / name).write_text(dump_cascades(bench.cascades[(pi, size)]))
            files["cascades"][f"{tag}_n{size}"] = name
            sz = [len(c) for c in bench.cascades[(pi, size)]]
            log.info("mixture %s, %d cascades, mean size %.2f", tag, size, float(np.mean(sz)))
    return {"files": files}


def cmd_infer(args, out: Path) -> dict:
    nodes = NodeIds()
    skeleton = load_edge_list(_resolve(args.graph, "graph").read_text(), nodes=nodes) if args.graph else None
    cascades = _load_cascades(args, nodes)
    if args.min_engagements > 1:
        cascades, kept = filter_min_engagements(cascades, args.min_engagements)
        log.info("kept %d users, %d cascades", len(kept), len(cascades))
    window = Window.parse(args.window)
    cand = derive_candidate_edges(index_cascades(cascades, window, skeleton))
    cfg = EMConfig(k=args.k, max_iters=args.max_iters, tol=args.tol, restarts=args.restarts, init_seed=args.seed)
    params, post, state = (fit_hic if args.hic else fit)(cand, cfg)
    params.meta["window"] = window.to_dict()
    save_model(params, out / "model.json")
    header = ["cascade_id"] + [f"gamma_{n}" for n in params.names]
    write_csv(out / "posterior.csv", header, ([cid] + [float(g) for g in post.gamma[i]] for i, cid in enumerate(post.cascade_ids)))
    for w in state.warnings:
        log.warning(w)
    return {"candidate_edges": cand.m, "iterations": state.iteration, "converged": state.converged,
            "nll": state.nll_trace[-1], "pi": params.pi.tolist()}


def cmd_cluster(args, out: Path) -> dict:
    cascades = _load_cascades(args)
    params = load_model(_resolve(args.model, "model"), cascades.nodes)
    post = posterior(cascades, params)
    truth = cascades.labels
    if not any(lab is not None for lab in truth):
        raise DomainError("cluster needs labelled cascades for the holdout mapping")
    report = cluster_report(post, params, truth, args.holdout_frac, args.seed)
    write_cluster_report(out / "cluster_report.csv", report)
    (out / "metrics.json").write_text(json.dumps(report.metrics, indent=1) + "\n")
    order = [c for lab in ("true", "fake") for c, l2 in report.mapping.items() if l2 == lab]
    labeled = params.permuted(order)
    labeled.names = ("true", "fake")
    save_model(labeled, out / "model_labeled.json")
    return {"metrics": report.metrics, "mapping": {str(k): v for k, v in report.mapping.items()}}


def cmd_stats(args, out: Path) -> dict:
    nodes = NodeIds()
    followers = load_edge_list(_resolve(args.followers, "followers").read_text(), nodes=nodes) if args.followers else None
    cascades = _load_cascades(args, nodes)
    fake = [c for c in cascades if c.label == "fake"]
    true = [c for c in cascades if c.label == "true"]
    results = [temporal_test([c for c in fake if len(c) > 1], [c for c in true if len(c) > 1])]
    summary = {"temporal": asdict(results[0])}
    if followers is not None:
        r = {}
        for name, group in (("fake", fake), ("true", true)):
            r[name] = [weak_component_stats(build_retweet_graph(c, followers), len(c)).r for c in group]
            write_ecdf(out / f"ecdf_{name}.csv", ecdf(r[name]))
        results.append(structural_test(r["fake"], r["true"]))
        summary["structural"] = asdict(results[1])
    write_stats_report(out / "stats_report.csv", results)
    return summary


def cmd_influencers(args, out: Path) -> dict:
    params = load_model(_resolve(args.model, "model"))
    graph = params.skeleton()
    result = {}
    for i, name in enumerate(params.names):
        ranking = greedy_influencers(graph, params.component(i), args.top, args.rounds, args.seed, component=name)
        write_influencers(out / f"influencers_{name}.csv", ranking, params.nodes)
        result[name] = [params.nodes.name(u) for u in ranking.nodes[:10]]
    return {"top10": result}


def _predicted(path: Path) -> dict[str, str]:
    import csv
    with path.open() as fh:
        return {row["cascade_id"]: row["predicted"] for row in csv.DictReader(fh)}


def cmd_intervene(args, out: Path) -> dict:
    nodes = NodeIds()
    params = load_model(_resolve(args.model, "model"), nodes)
    cascades = _load_cascades(args, nodes)
    if args.fake_component not in params.names:
        raise DomainError(f"model has no component {args.fake_component!r} (has {list(params.names)})")
    if args.cluster_report:
        pred = _predicted(_resolve(args.cluster_report, "cluster-report"))
        labels = [pred.get(c.id) for c in cascades]
    else:
        labels = cascades.labels
    fake = [c for c, lab in zip(cascades, labels) if lab == "fake"]
    if not fake:
        raise DomainError("no fake cascades to evaluate")
    K = [int(x) for x in args.K.split(",")]
    graph = params.skeleton()
    fake_params = params.component(args.fake_component)
    ranking = greedy_influencers(graph, fake_params, max(K), args.rounds, args.seed, component=args.fake_component)
    node_reports = [
        node_intervention_eval(fake, node_strategy_mic(ranking), K, "mic"),
        node_intervention_eval(fake, node_strategy_topu(list(cascades)), K, "topu"),
    ]
    write_interventions(out / "intervention_node.csv", node_reports)
    edge_reports = [
        edge_intervention_eval(graph, fake_params, edge_strategy_mic(fake_params), K, args.rounds, fake, args.seed, strategy="mic"),
        edge_intervention_eval(graph, fake_params, edge_strategy_random(graph, args.seed), K, args.rounds, fake, args.seed,
                               strategy="random"),
    ]
    write_interventions(out / "intervention_edge.csv", edge_reports)
    return {r.strategy + "_" + kind: r.reduction for kind, reps in (("node", node_reports), ("edge", edge_reports)) for r in reps}


COMMANDS = {
    "generate": cmd_generate,
    "infer": cmd_infer,
    "cluster": cmd_cluster,
    "stats": cmd_stats,
    "influencers": cmd_influencers,
    "intervene": cmd_intervene,
}


def _manifest(args, started: float, result: dict) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("verbose",)}
    for key in ("cascades", "followers", "model", "graph", "out", "config", "cluster_report"):
        if cfg.get(key):
            cfg[key] = str(Path(cfg[key]).resolve())
    return {
        "subcommand": args.subcommand,
        "config": cfg,
        "seed": args.seed,
        "versions": {"cascademix": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_time_s": time.time() - started,
        "result": result,
    }


def run(argv=None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"cascademix: usage error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.time()
    try:
        if args.subcommand == "dump":
            cascades = _load_cascades(args)
            text = dump_cascades(cascades)
            if args.out:
                out = _prepare_out(args)
                (out / "cascades.jsonl").write_text(text)
            else:
                sys.stdout.write(text)
            return 0
        out = _prepare_out(args)
        result = COMMANDS[args.subcommand](args, out)
        (out / "manifest.json").write_text(json.dumps(_manifest(args, started, result), indent=1, default=str) + "\n")
    except UsageError as exc:
        print(f"cascademix {args.subcommand}: usage error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, ParseError, OSError, KeyError) as exc:
        print(f"cascademix {args.subcommand}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
