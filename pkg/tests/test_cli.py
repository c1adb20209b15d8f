from __future__ import annotations

import json
import struct

import pytest

from aitrail.cli import main


@pytest.fixture
def home(tmp_path):
    return tmp_path / "workspace"


def run(capsys, home, *argv) -> tuple[int, str, str]:
    code = main(["--home", str(home), *argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, home, *argv):
    code, out, err = run(capsys, home, *argv)
    assert code == 0, f"command failed: {err}"
    return json.loads(out)


@pytest.fixture
def ws(capsys, home):
    run_json(capsys, home, "init")
    return home


def _register_pair(capsys, ws):
    run_json(capsys, ws, "register", "alice", "--node-type", "LargeLanguageModel")
    run_json(capsys, ws, "register", "bob", "--node-type", "McpServer")
    for name in ("alice", "bob"):
        run_json(capsys, ws, "vc", "apply", name, "--claim", f"capability={name}")
        run_json(capsys, ws, "vc", "approve", name)


def test_init_creates_workspace_and_ca(capsys, home):
    out = run_json(capsys, home, "init")
    assert out["caDid"].startswith("did:aat:")
    assert (home / "ledger.log").exists()
    code, _, _ = run(capsys, home, "init")
    assert code == 1  # refuses to clobber without --force


def test_register_prints_did_document(capsys, ws):
    doc = run_json(capsys, ws, "register", "alice", "--node-type", "LargeLanguageModel",
                   "--functionality", "summarization")
    assert doc["version"] == 1
    assert doc["nodeType"] == "LargeLanguageModel"
    assert doc["erl"] == 0 and doc["beta"] == 500


def test_vc_lifecycle_and_verification(capsys, ws):
    run_json(capsys, ws, "register", "alice")
    applied = run_json(capsys, ws, "vc", "apply", "alice", "--claim", "capability=x")
    vc = run_json(capsys, ws, "vc", "approve", "alice")
    verdict = run_json(capsys, ws, "verify-vp", "--holder", "alice",
                       "--vc-hash", vc["vcHash"])
    assert verdict["accepted"] is True
    run_json(capsys, ws, "vc", "revoke", vc["vcHash"])
    verdict = run_json(capsys, ws, "verify-vp", "--holder", "alice",
                       "--vc-hash", vc["vcHash"])
    assert verdict["accepted"] is False and verdict["reason"] == "Revoked"
    assert applied["documentHash"] != vc["vcHash"]


def test_replay_detected_across_cli_invocations(capsys, ws):
    run_json(capsys, ws, "register", "alice")
    run_json(capsys, ws, "vc", "apply", "alice", "--claim", "capability=x")
    vc = run_json(capsys, ws, "vc", "approve", "alice")
    nonce = "ab" * 16
    first = run_json(capsys, ws, "verify-vp", "--holder", "alice",
                     "--vc-hash", vc["vcHash"], "--nonce", nonce)
    assert first["accepted"] is True
    second = run_json(capsys, ws, "verify-vp", "--holder", "alice",
                      "--vc-hash", vc["vcHash"], "--nonce", nonce)
    assert second["accepted"] is False and second["reason"] == "Replay"


def test_trajectory_flow_and_graph_commands(capsys, ws):
    _register_pair(capsys, ws)
    issued = run_json(capsys, ws, "trajectory", "issue", "--requester", "alice")
    tid = issued["trajectoryId"]
    run_json(capsys, ws, "trajectory", "log", "--caller", "alice", "--callees", "bob",
             "--id", tid, "--action", "request", "--payload", "hello")
    run_json(capsys, ws, "trajectory", "ack", "--callee", "bob", "--caller", "alice",
             "--id", tid, "--payload", "hello")
    report = run_json(capsys, ws, "trajectory", "reconcile", "--id", tid)
    assert report["matched"] == 1

    restored = run_json(capsys, ws, "graph", "restore", tid)
    assert len(restored["edges"]) == 1

    code, out, _ = run(capsys, ws, "graph", "restore", tid, "--format", "dot")
    assert code == 0 and out.count("->") == 1

    trace = run_json(capsys, ws, "graph", "trace", tid, "bob")
    assert len(trace["reached"]) == 1

    forks = run_json(capsys, ws, "graph", "forks", tid)
    assert forks == []


def test_sequential_ledger_restores_dot_with_three_edges(capsys, ws):
    for name in ("a", "b", "c", "d"):
        run_json(capsys, ws, "register", name)
        run_json(capsys, ws, "vc", "apply", name, "--claim", f"capability={name}")
        run_json(capsys, ws, "vc", "approve", name)
    tid = run_json(capsys, ws, "trajectory", "issue", "--requester", "a")["trajectoryId"]
    for caller, callee in (("a", "b"), ("b", "c"), ("c", "d")):
        run_json(capsys, ws, "trajectory", "log", "--caller", caller,
                 "--callees", callee, "--id", tid, "--payload", "hop")
        run_json(capsys, ws, "trajectory", "ack", "--callee", callee,
                 "--caller", caller, "--id", tid, "--payload", "hop")
    code, out, _ = run(capsys, ws, "graph", "restore", tid, "--format", "dot")
    assert code == 0 and out.count("->") == 3


def test_verify_vp_from_presentation_file(capsys, ws, tmp_path):
    run_json(capsys, ws, "register", "alice")
    run_json(capsys, ws, "vc", "apply", "alice", "--claim", "capability=x")
    vc = run_json(capsys, ws, "vc", "approve", "alice")

    from aitrail.identity import make_presentation
    from aitrail.keys import SigningKey
    key = SigningKey.from_seed(bytes.fromhex((ws / "keys" / "alice.key").read_text()))
    p = make_presentation(key, bytes.fromhex(vc["vcHash"]), b"\x07" * 16, timestamp=5)
    path = tmp_path / "presentation.json"
    path.write_text(json.dumps(p.to_json_obj()))
    verdict = run_json(capsys, ws, "verify-vp", "--file", str(path), "--now", "5")
    assert verdict["accepted"] is True


def test_cli_restore_and_http_body_are_byte_identical(capsys, ws):
    import urllib.request

    from aitrail.facade import AuditFacade

    _register_pair(capsys, ws)
    tid = run_json(capsys, ws, "trajectory", "issue", "--requester", "alice")["trajectoryId"]
    run_json(capsys, ws, "trajectory", "log", "--caller", "alice", "--callees", "bob",
             "--id", tid, "--payload", "x")

    code, out, _ = run(capsys, ws, "graph", "restore", tid)
    assert code == 0

    from aitrail.cli import Workspace
    fresh = Workspace(ws)
    facade = AuditFacade(fresh.ledger(), fresh.identity())
    facade.start_background()
    host, port = facade.address
    try:
        with urllib.request.urlopen(f"http://{host}:{port}/trajectory/{tid}") as response:
            body = response.read()
    finally:
        facade.shutdown()
    assert body == out.encode()


def test_graph_export_writes_file(capsys, ws, tmp_path):
    _register_pair(capsys, ws)
    tid = run_json(capsys, ws, "trajectory", "issue", "--requester", "alice")["trajectoryId"]
    run_json(capsys, ws, "trajectory", "log", "--caller", "alice", "--callees", "bob",
             "--id", tid, "--payload", "x")
    out_path = tmp_path / "graph.dot"
    code, _, _ = run(capsys, ws, "graph", "export", tid, "--out", str(out_path))
    assert code == 0 and out_path.read_text().startswith("digraph")


def test_risk_pipeline(capsys, ws):
    _register_pair(capsys, ws)
    tid = run_json(capsys, ws, "trajectory", "issue", "--requester", "alice")["trajectoryId"]
    run_json(capsys, ws, "trajectory", "log", "--caller", "alice", "--callees", "bob",
             "--id", tid, "--payload", "x")
    # bob never acknowledges: missing receipt evidence
    filed = run_json(capsys, ws, "risk", "report", "--t0", "0", "--t1", "99999",
                     "--description", "incident")
    finding = run_json(capsys, ws, "risk", "audit", "--report-index",
                       str(filed["reportIndex"]))
    assert len(finding["vRisk"]) == 1
    applied = run_json(capsys, ws, "risk", "apply", "--report-index",
                       str(filed["reportIndex"]))
    assert "diffusion" in applied


def test_verify_chain_detects_file_tampering(capsys, ws):
    run_json(capsys, ws, "register", "alice")
    report = run_json(capsys, ws, "verify-chain")
    assert report["valid"] is True

    ledger_path = ws / "ledger.log"
    data = bytearray(ledger_path.read_bytes())
    (length,) = struct.unpack(">I", data[8:12])
    payload_offset = 12 + 8 + 1 + 36 + 36 + 4
    data[payload_offset] ^= 0xFF
    ledger_path.write_bytes(bytes(data))

    code, out, _ = run(capsys, ws, "verify-chain")
    assert code == 1
    assert json.loads(out)["firstBadIndex"] == 0


def test_unknown_subcommand_is_a_usage_error(capsys, home):
    with pytest.raises(SystemExit) as excinfo:
        main(["--home", str(home), "frobnicate"])
    assert excinfo.value.code == 2


def test_load_estimate_command(capsys, home):
    out = run_json(capsys, home, "load-estimate",
                   "--platform", "deepseek=22000000", "--platform", "openai=120000000",
                   "--per-capita", "100", "--reference-tps", "15500000")
    assert out["requiredTpsRange"] == [25463, 138889]
    assert out["redundancyReportedRange"] == [110, 600]


def test_scenario_run_preset_outputs_metrics(capsys, home):
    code, out, _ = run(capsys, home, "scenario", "run", "--preset",
                       "sequential-4-tampering", "--seed", "3")
    assert code == 0
    metrics = json.loads(out)
    assert metrics["attributionAccuracy"] == 1.0
    assert metrics["multihopTraceability"] == 1.0


def test_scenario_run_spec_file(capsys, home, tmp_path):
    from aitrail.harness import preset
    spec_path = tmp_path / "scenario.json"
    spec_path.write_text(preset("parallel-fork-clean", seed=2).to_json())
    metrics = run_json(capsys, home, "scenario", "run", str(spec_path))
    assert metrics["pathForkAccuracy"] == 1.0


def test_scenario_report_dir_then_metrics_table(capsys, home, tmp_path):
    report_dir = tmp_path / "report"
    code, out, err = run(capsys, home, "scenario", "run", "--batch",
                         "--seeds", "1", "--report-dir", str(report_dir))
    assert code == 0
    assert (report_dir / "metrics.json").exists()
    assert (report_dir / "metrics.csv").exists()
    assert (report_dir / "metrics.png").exists()

    code, out, _ = run(capsys, home, "scenario", "metrics",
                       "--report-dir", str(report_dir))
    assert code == 0
    assert "Integrity Validation" in out and "100.0%" in out


def test_operation_errors_exit_1(capsys, ws):
    code, _, err = run(capsys, ws, "vc", "approve", "nobody")
    assert code == 1 and "error" in err
