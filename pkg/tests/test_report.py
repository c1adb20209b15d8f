from __future__ import annotations

import csv
import json

from aitrail import graph as graphmod
from aitrail.harness import run_standard_batch
from aitrail.report import plot_graph, write_batch_report, write_metrics_files


def test_batch_report_writes_delimited_output_and_figures(tmp_path):
    result = run_standard_batch(seeds=1, base_seed=3, legitimate=5, attack_instances=1)
    written = write_batch_report(result, tmp_path)

    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["auditTrail"] == 1.0

    with open(tmp_path / "metrics.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["indicator", "value"]
    assert len(rows) == 7

    assert (tmp_path / "metrics.png").stat().st_size > 0
    assert (tmp_path / "metrics.txt").read_text().startswith("trustworthiness")

    graphs = sorted(p.name for p in (tmp_path / "graphs").iterdir())
    assert "sequential-4-clean.png" in graphs
    assert "sequential-4-clean.dot" in graphs
    assert "parallel-fork-clean.png" in graphs
    assert len(json.loads((tmp_path / "attacks.json").read_text())) == 4
    assert all(p.exists() for p in written)


def test_metrics_files_are_deterministic(tmp_path):
    a = run_standard_batch(seeds=1, base_seed=3, legitimate=5, attack_instances=1)
    b = run_standard_batch(seeds=1, base_seed=3, legitimate=5, attack_instances=1)
    write_metrics_files(a.metrics, tmp_path / "a")
    write_metrics_files(b.metrics, tmp_path / "b")
    for name in ("metrics.json", "metrics.csv", "metrics.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_plot_graph_handles_empty_graph(tmp_path):
    path = plot_graph(graphmod.TrajectoryGraph(), tmp_path / "empty.png")
    assert path.stat().st_size > 0
