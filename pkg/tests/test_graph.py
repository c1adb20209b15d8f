from __future__ import annotations

import random

import pytest

from aitrail import graph as graphmod
from aitrail.errors import BadInterval, NotFound, UnknownNode
from conftest import graph_of
from oracles import hop_distances_bfs, random_dag, reachable_by_matrix_power


def _run_sequential(env):
    tlog = env.trajectories
    tid = tlog.issue_trajectory_id(env.ca, env.did("A"))
    from aitrail.keys import sha256
    for i, (caller, callee) in enumerate((("A", "B"), ("B", "C"), ("C", "D"))):
        payload = sha256(f"hop{i}".encode())
        tlog.log_interaction(env.keys[caller], [env.did(callee)], tid, "request", payload)
        tlog.acknowledge(env.keys[callee], env.did(caller), tid, payload)
    return tid


# --- restoration ---

def test_sequential_chain_restores_4_nodes_3_edges(env):
    tid = _run_sequential(env)
    g = graphmod.restore(env.ledger, tid)
    assert len(g.nodes) == 4
    assert len(g.edges) == 3
    assert [(e.caller, e.callee) for e in g.edges] == [
        (env.did("A"), env.did("B")),
        (env.did("B"), env.did("C")),
        (env.did("C"), env.did("D")),
    ]


def test_parallel_flow_restores_4_nodes_4_edges_with_fork():
    from aitrail.harness import build_network, preset, run_flow
    spec = preset("parallel-fork-clean", seed=5)
    env = build_network(spec)
    flow = run_flow(env, spec)
    g = graphmod.restore(env.ledger, flow.trajectory_id)
    assert len(g.nodes) == 4
    assert len(g.edges) == 4
    forks = graphmod.detect_forks(g)
    assert len(forks) == 1
    assert forks[0].node == env.did("A")
    assert {e.callee for e in forks[0].out_edges} == {env.did("B1"), env.did("B2")}
    env.ledger.close()


def test_issued_id_with_no_events_restores_empty_graph(env):
    tid = env.trajectories.issue_trajectory_id(env.ca, env.did("A"))
    g = graphmod.restore(env.ledger, tid)
    assert g.nodes == set() and g.edges == []


def test_restore_unissued_id_raises(env):
    with pytest.raises(NotFound):
        graphmod.restore(env.ledger, bytes(16))


# --- interval restoration ---

def test_full_interval_equals_union_of_per_id_graphs(env):
    tid = _run_sequential(env)
    merged = graphmod.restore_interval(env.ledger, 0, env.ledger.clock.current)
    per_id = graphmod.restore(env.ledger, tid)
    assert merged.nodes == per_id.nodes
    assert merged.edges == per_id.edges


def test_empty_interval_between_events_is_empty(env):
    _run_sequential(env)
    env.ledger.clock.advance_to(5000)
    g = graphmod.restore_interval(env.ledger, 4000, 4500)
    assert g.nodes == set()


def test_bad_interval_raises(env):
    with pytest.raises(BadInterval):
        graphmod.restore_interval(env.ledger, 10, 5)


def test_overlapping_trajectories_merge_on_shared_node(env):
    # two ids sharing node B: edges from both must appear once each
    from aitrail.keys import sha256
    tlog = env.trajectories
    t1 = tlog.issue_trajectory_id(env.ca, env.did("A"))
    t2 = tlog.issue_trajectory_id(env.ca, env.did("C"))
    tlog.log_interaction(env.keys["A"], [env.did("B")], t1, "request", sha256(b"1"))
    tlog.log_interaction(env.keys["C"], [env.did("B")], t2, "request", sha256(b"2"))
    merged = graphmod.restore_interval(env.ledger, 0, env.ledger.clock.current)
    # oracle: set union over a direct event scan
    expected_edges = {(env.did("A"), env.did("B")), (env.did("C"), env.did("B"))}
    assert {(e.caller, e.callee) for e in merged.edges} == expected_edges
    assert merged.nodes == {env.did("A"), env.did("B"), env.did("C")}
    assert merged.trajectory_ids == {t1, t2}


def test_widening_interval_never_removes_edges(env):
    _run_sequential(env)
    top = env.ledger.clock.current
    previous: set = set()
    for t1 in range(0, top + 1):
        edges = {(e.caller, e.callee, e.ledger_index)
                 for e in graphmod.restore_interval(env.ledger, 0, t1).edges}
        assert previous <= edges
        previous = edges


# --- tracing ---

def test_trace_source_on_chain_matches_expected_distances():
    # oracle: transitive closure by matrix powering, frozen here
    g = graph_of([("A", "B"), ("B", "C"), ("C", "D")])
    result = graphmod.trace_source(g, "D")
    assert result.reached == {"C", "B", "A"}
    assert result.hop_distance == {"C": 1, "B": 2, "A": 3}


def test_trace_source_of_root_is_empty():
    g = graph_of([("A", "B"), ("B", "C")])
    assert graphmod.trace_source(g, "A").reached == frozenset()


def test_trace_source_through_fork():
    g = graph_of([("A", "B1"), ("A", "B2"), ("B1", "C"), ("B2", "C")])
    assert graphmod.trace_source(g, "C").reached == {"B1", "B2", "A"}


def test_propagation_mirrors_trace_source():
    g = graph_of([("A", "B"), ("B", "C"), ("C", "D")])
    assert graphmod.propagation(g, "A").reached == {"B", "C", "D"}
    assert graphmod.propagation(g, "D").reached == frozenset()
    fork = graph_of([("A", "B1"), ("A", "B2"), ("B1", "C"), ("B2", "C")])
    assert graphmod.propagation(fork, "A").reached == {"B1", "B2", "C"}


def test_trace_unknown_node_raises():
    g = graph_of([("A", "B")])
    with pytest.raises(UnknownNode):
        graphmod.trace_source(g, "Z")


def test_bfs_equals_transitive_closure_oracle_on_random_dags():
    rng = random.Random(515)
    for _ in range(60):
        nodes, edges = random_dag(rng, max_nodes=12)
        g = graph_of(edges)
        for node in g.nodes:
            ancestors = reachable_by_matrix_power(nodes, edges, reverse=True)[node]
            descendants = reachable_by_matrix_power(nodes, edges)[node]
            back = graphmod.trace_source(g, node)
            fwd = graphmod.propagation(g, node)
            assert back.reached == ancestors
            assert fwd.reached == descendants
            assert back.hop_distance == hop_distances_bfs(nodes, edges, node, reverse=True)
            assert fwd.hop_distance == hop_distances_bfs(nodes, edges, node)


def test_tracing_terminates_on_cycles():
    g = graph_of([("A", "B"), ("B", "A"), ("B", "C")])
    assert graphmod.trace_source(g, "C").reached == {"A", "B"}
    assert graphmod.propagation(g, "A").reached == {"B", "C"}


# --- forks ---

def test_sequential_graph_has_no_forks():
    g = graph_of([("A", "B"), ("B", "C"), ("C", "D")])
    assert graphmod.detect_forks(g) == []


def test_three_way_fork_counted_once():
    ts = {("A", "B1"): 5, ("A", "B2"): 5, ("A", "B3"): 5}
    g = graph_of([("A", "B1"), ("A", "B2"), ("A", "B3")], timestamps=ts)
    forks = graphmod.detect_forks(g)
    assert len(forks) == 1
    assert len(forks[0].out_edges) == 3


def test_same_caller_different_ticks_is_not_a_fork():
    ts = {("A", "B1"): 5, ("A", "B2"): 6}
    g = graph_of([("A", "B1"), ("A", "B2")], timestamps=ts)
    assert graphmod.detect_forks(g) == []


# --- export ---

def test_empty_graph_exports_valid_dot():
    from aitrail.graph import TrajectoryGraph
    text = graphmod.export(TrajectoryGraph(), "dot")
    assert text.startswith("digraph") and text.endswith("}")


def test_three_edge_chain_has_three_edge_statements():
    g = graph_of([("A", "B"), ("B", "C"), ("C", "D")])
    text = graphmod.export(g, "dot")
    assert text.count("->") == 3


def test_json_export_round_trips(env):
    tid = _run_sequential(env)
    g = graphmod.restore(env.ledger, tid)
    text = graphmod.export(g, "json")
    back = graphmod.graph_from_json(text)
    assert back.nodes == g.nodes
    assert back.edges == g.edges
    assert back.trajectory_ids == g.trajectory_ids


def test_identical_ledgers_export_identical_json():
    from aitrail.harness import build_network, preset, run_flow
    outputs = []
    for _ in range(2):
        spec = preset("sequential-4-clean", seed=9)
        env = build_network(spec)
        flow = run_flow(env, spec)
        g = graphmod.restore(env.ledger, flow.trajectory_id)
        outputs.append(graphmod.export(g, "json"))
        env.ledger.close()
    assert outputs[0] == outputs[1]
