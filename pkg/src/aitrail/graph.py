"""Interaction-graph restoration and traversal.

Graphs are rebuilt on demand from ledger events: one directed edge per
recorded interaction, ordered by (timestamp, ledger index). Reverse BFS
answers "where did this come from", forward BFS answers "where did it
spread", and sibling edges sharing a caller and a tick mark a fork.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

from .errors import BadInterval, NotFound, UnknownNode
from .keys import address_to_did, did_to_address
from .ledger import Ledger
from .records import RecordKind


@dataclass(frozen=True)
class GraphEdge:
    caller: str
    callee: str
    trajectory_id: bytes
    action_type: str
    timestamp: int
    ledger_index: int

    def to_json_obj(self) -> dict:
        return {
            "caller": self.caller,
            "callee": self.callee,
            "trajectoryId": self.trajectory_id.hex(),
            "actionType": self.action_type,
            "timestamp": self.timestamp,
            "ledgerIndex": self.ledger_index,
        }


@dataclass
class TrajectoryGraph:
    nodes: set[str] = field(default_factory=set)
    edges: list[GraphEdge] = field(default_factory=list)
    trajectory_ids: set[bytes] = field(default_factory=set)

    def successors(self, node: str) -> list[str]:
        return [e.callee for e in self.edges if e.caller == node]

    def predecessors(self, node: str) -> list[str]:
        return [e.caller for e in self.edges if e.callee == node]

    def neighbors(self, node: str) -> set[str]:
        """Adjacent nodes ignoring edge direction."""
        out = set()
        for e in self.edges:
            if e.caller == node:
                out.add(e.callee)
            elif e.callee == node:
                out.add(e.caller)
        return out


@dataclass(frozen=True)
class TraceResult:
    origin: str
    reached: frozenset[str]
    hop_distance: dict[str, int]

    def to_json_obj(self) -> dict:
        return {
            "origin": self.origin,
            "reached": sorted(self.reached),
            "hopDistance": {did: self.hop_distance[did] for did in sorted(self.hop_distance)},
        }


@dataclass(frozen=True)
class ForkPoint:
    node: str
    timestamp: int
    out_edges: tuple[GraphEdge, ...]

    def to_json_obj(self) -> dict:
        return {
            "node": self.node,
            "timestamp": self.timestamp,
            "outEdges": [e.to_json_obj() for e in self.out_edges],
        }


def _edges_from_records(records) -> list[GraphEdge]:
    edges = []
    for rec in records:
        body = rec.body()
        edges.append(GraphEdge(
            caller=address_to_did(rec.author),
            callee=address_to_did(body.callee),
            trajectory_id=body.trajectory_id,
            action_type=body.action_type,
            timestamp=rec.timestamp,
            ledger_index=rec.index,
        ))
    edges.sort(key=lambda e: (e.timestamp, e.ledger_index))
    return edges


def _graph_from_edges(edges: list[GraphEdge]) -> TrajectoryGraph:
    g = TrajectoryGraph()
    for e in edges:
        g.nodes.add(e.caller)
        g.nodes.add(e.callee)
        g.edges.append(e)
        g.trajectory_ids.add(e.trajectory_id)
    return g


def restore(ledger: Ledger, trajectory_id: bytes) -> TrajectoryGraph:
    """Graph of one trajectory; NotFound if the identifier was never issued."""
    issued = {rec.body().trajectory_id
              for rec in ledger.query(kind=RecordKind.TRAJECTORY_ISSUED)}
    if trajectory_id not in issued:
        raise NotFound(trajectory_id.hex())
    records = ledger.query(kind=RecordKind.INTERACTION_LOGGED, trajectory_id=trajectory_id)
    g = _graph_from_edges(_edges_from_records(records))
    g.trajectory_ids.add(trajectory_id)
    return g


def restore_interval(ledger: Ledger, t0: int, t1: int) -> TrajectoryGraph:
    """Merged graph of every interaction with t0 <= timestamp <= t1."""
    if t0 > t1:
        raise BadInterval(f"{t0} > {t1}")
    records = ledger.query(kind=RecordKind.INTERACTION_LOGGED, time_interval=(t0, t1))
    return _graph_from_edges(_edges_from_records(records))


def _bfs(g: TrajectoryGraph, origin: str, forward: bool) -> TraceResult:
    if origin not in g.nodes:
        raise UnknownNode(origin)
    step = g.successors if forward else g.predecessors
    distance: dict[str, int] = {}
    queue = deque([(origin, 0)])
    seen = {origin}
    while queue:
        node, hops = queue.popleft()
        for nxt in step(node):
            if nxt not in seen:
                seen.add(nxt)
                distance[nxt] = hops + 1
                queue.append((nxt, hops + 1))
    return TraceResult(origin=origin, reached=frozenset(distance), hop_distance=distance)


def trace_source(g: TrajectoryGraph, node: str) -> TraceResult:
    """Reverse BFS: every ancestor of the node with its minimal hop count."""
    return _bfs(g, node, forward=False)


def propagation(g: TrajectoryGraph, node: str) -> TraceResult:
    """Forward BFS: everything reachable downstream of the node."""
    return _bfs(g, node, forward=True)


def detect_forks(g: TrajectoryGraph) -> list[ForkPoint]:
    """Concurrently issued calls: edge groups sharing caller and tick."""
    groups: dict[tuple[str, int], list[GraphEdge]] = {}
    for e in g.edges:
        groups.setdefault((e.caller, e.timestamp), []).append(e)
    forks = [ForkPoint(node=caller, timestamp=ts, out_edges=tuple(edges))
             for (caller, ts), edges in groups.items() if len(edges) >= 2]
    forks.sort(key=lambda f: (f.timestamp, f.node))
    return forks


def export(g: TrajectoryGraph, format: str = "json") -> str:
    """Render a graph as DOT or JSON text (no trailing newline)."""
    if format == "json":
        payload = {
            "nodes": sorted(g.nodes),
            "edges": [e.to_json_obj() for e in g.edges],
        }
        return json.dumps(payload, indent=2, sort_keys=True)
    if format == "dot":
        lines = ["digraph trajectory {"]
        for node in sorted(g.nodes):
            lines.append(f'  "{node}";')
        for e in g.edges:
            lines.append(
                f'  "{e.caller}" -> "{e.callee}" '
                f'[label="{e.action_type}@{e.timestamp}"];')
        lines.append("}")
        return "\n".join(lines)
    raise ValueError(f"unknown export format: {format}")


def graph_from_json(text: str) -> TrajectoryGraph:
    obj = json.loads(text)
    edges = [GraphEdge(
        caller=e["caller"],
        callee=e["callee"],
        trajectory_id=bytes.fromhex(e["trajectoryId"]),
        action_type=e["actionType"],
        timestamp=int(e["timestamp"]),
        ledger_index=int(e["ledgerIndex"]),
    ) for e in obj["edges"]]
    g = _graph_from_edges(edges)
    for node in obj["nodes"]:
        did_to_address(node)  # validate shape
        g.nodes.add(node)
    return g
