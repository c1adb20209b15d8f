"""Report rendering: delimited metric files plus matplotlib figures.

The scenario report directory gets the metrics as JSON, CSV, and an aligned
text table, a bar chart of the indicators, and one rendered call graph per
flow preset. Graph layout is computed here (nodes in columns by hop depth)
so figures come out the same on every run.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from . import graph as graphmod
from .harness import BatchResult, Metrics

_INDICATORS = [
    ("Integrity Validation", "integrity_validation"),
    ("Tamper Rejection", "tamper_rejection"),
    ("Audit Trail", "audit_trail"),
    ("Attribution Accuracy", "attribution_accuracy"),
    ("Multi-hop Traceability", "multihop_traceability"),
    ("Path Fork Accuracy", "path_fork_accuracy"),
]


def write_metrics_files(metrics: Metrics, outdir: Path) -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    json_path = outdir / "metrics.json"
    json_path.write_text(metrics.to_json() + "\n")

    csv_path = outdir / "metrics.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["indicator", "value"])
        for label, attr in _INDICATORS:
            value = getattr(metrics, attr)
            writer.writerow([label, "" if value is None else f"{value:.6f}"])

    table_path = outdir / "metrics.txt"
    table_path.write_text(metrics.text_table() + "\n")
    return [json_path, csv_path, table_path]


def plot_metrics(metrics: Metrics, path: Path) -> Path:
    labels, values = [], []
    for label, attr in _INDICATORS:
        value = getattr(metrics, attr)
        if value is not None:
            labels.append(label)
            values.append(value * 100)
    fig, ax = plt.subplots(figsize=(8, 4))
    bars = ax.bar(range(len(labels)), values, color="#3465a4")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("result (%)")
    ax.set_ylim(0, 110)
    for bar, value in zip(bars, values):
        ax.annotate(f"{value:.0f}%", (bar.get_x() + bar.get_width() / 2, value),
                    ha="center", va="bottom", fontsize=8)
    ax.set_title("verification indicators")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _layered_layout(g: graphmod.TrajectoryGraph) -> dict[str, tuple[float, float]]:
    """Columns by minimal hop depth from the root nodes; deterministic."""
    roots = sorted(n for n in g.nodes if not g.predecessors(n)) or sorted(g.nodes)[:1]
    depth: dict[str, int] = {r: 0 for r in roots}
    frontier = list(roots)
    while frontier:
        nxt = []
        for node in frontier:
            for succ in sorted(g.successors(node)):
                if succ not in depth:
                    depth[succ] = depth[node] + 1
                    nxt.append(succ)
        frontier = nxt
    for node in sorted(g.nodes):
        depth.setdefault(node, 0)
    columns: dict[int, list[str]] = {}
    for node in sorted(depth):
        columns.setdefault(depth[node], []).append(node)
    pos = {}
    for d, nodes in columns.items():
        for i, node in enumerate(nodes):
            pos[node] = (float(d), -(i - (len(nodes) - 1) / 2))
    return pos


def plot_graph(g: graphmod.TrajectoryGraph, path: Path, title: str = "") -> Path:
    pos = _layered_layout(g)
    fig, ax = plt.subplots(figsize=(7, 4))
    for e in g.edges:
        x0, y0 = pos[e.caller]
        x1, y1 = pos[e.callee]
        ax.annotate("", xy=(x1, y1), xytext=(x0, y0),
                    arrowprops=dict(arrowstyle="-|>", color="#555555", lw=1.2,
                                    shrinkA=16, shrinkB=16))
        ax.annotate(e.action_type, ((x0 + x1) / 2, (y0 + y1) / 2 + 0.08),
                    ha="center", fontsize=7, color="#777777")
    for node, (x, y) in pos.items():
        short = node.removeprefix("did:aat:")[:8]
        ax.scatter([x], [y], s=900, color="#d3e5f5", edgecolors="#3465a4", zorder=3)
        ax.annotate(short, (x, y), ha="center", va="center", fontsize=7, zorder=4)
    ax.set_title(title or "interaction graph")
    ax.axis("off")
    if pos:
        xs = [p[0] for p in pos.values()]
        ys = [p[1] for p in pos.values()]
        ax.set_xlim(min(xs) - 0.6, max(xs) + 0.6)
        ax.set_ylim(min(ys) - 0.6, max(ys) + 0.6)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_batch_report(result: BatchResult, outdir: Path | str) -> list[Path]:
    """Everything an operator wants after a batch run: delimited metrics,
    the indicator chart, and one figure + DOT per distinct flow preset."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = write_metrics_files(result.metrics, outdir)
    written.append(plot_metrics(result.metrics, outdir / "metrics.png"))

    graphs_dir = outdir / "graphs"
    graphs_dir.mkdir(exist_ok=True)
    seen = set()
    for outcome in result.scenario_outcomes:
        name = outcome.spec.name
        if name in seen or outcome.restored is None:
            continue
        seen.add(name)
        written.append(plot_graph(outcome.restored, graphs_dir / f"{name}.png", title=name))
        dot_path = graphs_dir / f"{name}.dot"
        dot_path.write_text(graphmod.export(outcome.restored, "dot") + "\n")
        written.append(dot_path)

    attacks_path = outdir / "attacks.json"
    attacks_path.write_text(json.dumps(
        [a.to_json_obj() for a in result.attack_outcomes], indent=2, sort_keys=True) + "\n")
    written.append(attacks_path)
    return written
