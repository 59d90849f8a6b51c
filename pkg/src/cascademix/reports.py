"""CSV outputs. Floats are written with repr() so reruns are byte-identical."""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Iterable, Sequence

log = logging.getLogger(__name__)


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else x


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def write_cluster_report(path, report) -> Path:
    col = next((c for c, lab in report.mapping.items() if lab == "true"), 0)
    rows = ((cid, float(report.gamma[i, col]), report.predicted[i], report.truth[i])
            for i, cid in enumerate(report.cascade_ids))
    return write_csv(path, ["cascade_id", "gamma_T", "predicted", "truth"], rows)


def write_stats_report(path, results) -> Path:
    rows = []
    for r in results:
        rows.append((r.name, float(r.statistic), float(r.p)))
        if r.z is not None:
            rows.append((r.name + "_z", float(r.z), float(r.p)))
    return write_csv(path, ["test", "statistic", "p"], rows)


def write_ecdf(path, points) -> Path:
    return write_csv(path, ["value", "F"], ((float(v), float(f)) for v, f in points))


def write_influencers(path, ranking, nodes) -> Path:
    cum = ranking.cumulative
    rows = ((i + 1, nodes.name(u), float(g), float(cum[i])) for i, (u, g) in enumerate(zip(ranking.nodes, ranking.gains)))
    return write_csv(path, ["rank", "node", "marginal_gain", "cumulative_sigma"], rows)


def write_interventions(path, reports) -> Path:
    rows = (row for rep in reports for row in rep.rows())
    return write_csv(path, ["strategy", "K", "mean_reduction_pct", "n_eval"],
                     ((s, k, float(r), n) for s, k, r, n in rows))


FAMILIES = {
    "recoverability": ["sample_size", "mixture", "mae"],
    "separability": ["sample_size", "mixture", "accuracy", "f1"],
    "interventions": ["strategy", "K", "reduction"],
}


def _mix_tag(mixture) -> str:
    if isinstance(mixture, str):
        return mixture
    return "-".join(f"{x:.2f}" for x in mixture)


def emit_plots_data(reports: Sequence[dict], out_dir: str | Path) -> list[Path]:
    """One CSV per figure family (and per mixture for the curve families).

    Each report is a dict with a ``family`` key plus that family's columns;
    ``ecdf`` reports carry ``group`` and ``points``.
    """
    out_dir = Path(out_dir)
    if not reports:
        log.warning("no reports, nothing written")
        return []
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    groups: dict[tuple[str, str], list[dict]] = {}
    for rep in reports:
        fam = rep["family"]
        if fam == "ecdf":
            written.append(write_ecdf(out_dir / f"ecdf_{rep['group']}.csv", rep["points"]))
            continue
        if fam not in FAMILIES:
            raise ValueError(f"unknown report family {fam!r}")
        key = _mix_tag(rep["mixture"]) if "mixture" in rep else ""
        groups.setdefault((fam, key), []).append(rep)
    for (fam, key), reps in sorted(groups.items()):
        cols = FAMILIES[fam]
        name = f"{fam}_{key}.csv" if key else f"{fam}.csv"
        rows = [[_mix_tag(r[c]) if c == "mixture" else r[c] for c in cols] for r in reps]
        written.append(write_csv(out_dir / name, cols, rows))
    return written
