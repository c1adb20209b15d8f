from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from aitrail.graph import GraphEdge, TrajectoryGraph
from aitrail.harness import build_network, preset
from aitrail.identity import IdentityRegistry, InMemoryCredentialStore
from aitrail.keys import SigningKey
from aitrail.ledger import Ledger


@pytest.fixture
def ca_key() -> SigningKey:
    return SigningKey.derive(99, "ca")


@pytest.fixture
def ledger() -> Ledger:
    return Ledger()


@pytest.fixture
def identity(ledger, ca_key) -> IdentityRegistry:
    registry = IdentityRegistry(ledger, ca_key.address, InMemoryCredentialStore())
    registry.register_metadata(ca_key, "mem://ca", functionality="credential authority")
    return registry


@pytest.fixture
def env():
    """4-node sequential environment with approved credentials."""
    environment = build_network(preset("sequential-4-clean", seed=42))
    yield environment
    environment.ledger.close()


def graph_of(edges: list[tuple[str, str]], timestamps: dict | None = None,
             nodes: list[str] | None = None) -> TrajectoryGraph:
    """Hand-built graph for traversal tests; one synthetic trajectory id."""
    tid = bytes(16)
    g = TrajectoryGraph()
    for i, (caller, callee) in enumerate(edges):
        ts = timestamps.get((caller, callee), i + 1) if timestamps else i + 1
        g.edges.append(GraphEdge(caller=caller, callee=callee, trajectory_id=tid,
                                 action_type="request", timestamp=ts, ledger_index=i))
        g.nodes.add(caller)
        g.nodes.add(callee)
        g.trajectory_ids.add(tid)
    for node in nodes or ():
        g.nodes.add(node)
    return g
