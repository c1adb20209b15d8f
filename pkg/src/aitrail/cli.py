"""Operator CLI: every ledger, identity, trajectory, graph, risk, scenario,
and capacity operation behind one entry point.

State lives in a workspace directory (``--home``, or ``$AITRAIL_HOME``,
default ``.aitrail``): the ledger file, the authority key, per-entity keys,
the off-ledger claims store, and the verifier's nonce registry. Results go
to stdout as JSON; diagnostics go to stderr; operation failures exit 1 and
usage errors exit 2.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import graph as graphmod
from . import harness, report
from . import risk as riskmod
from .capacity import load_estimate
from .encoding import encode_claims
from .errors import AitrailError, BadInput
from .facade import AuditFacade
from .identity import (
    DirectoryCredentialStore,
    IdentityRegistry,
    Presentation,
    SystemConfig,
    make_presentation,
)
from .keys import DID_PREFIX, SigningKey, sha256
from .ledger import Ledger
from .records import NODE_TYPE_BY_LABEL
from .trajectory import TrajectoryLog


@dataclass
class CliConfig:
    ledger_path: str
    ca_key_path: str
    replay_window: int = 300
    default_erl: int = 0
    default_beta: int = 500
    http_bind: str = "127.0.0.1:8350"

    def to_json_obj(self) -> dict:
        return {
            "ledgerPath": self.ledger_path,
            "caKeyPath": self.ca_key_path,
            "replayWindow": self.replay_window,
            "defaultErl": self.default_erl,
            "defaultBeta": self.default_beta,
            "httpBind": self.http_bind,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "CliConfig":
        return cls(
            ledger_path=obj["ledgerPath"],
            ca_key_path=obj["caKeyPath"],
            replay_window=obj["replayWindow"],
            default_erl=obj["defaultErl"],
            default_beta=obj["defaultBeta"],
            http_bind=obj["httpBind"],
        )


class Workspace:
    """Lazily opens the ledger and registries rooted at one directory."""

    def __init__(self, home: Path) -> None:
        self.home = home
        self._ledger: Ledger | None = None
        self._identity: IdentityRegistry | None = None

    @property
    def config_path(self) -> Path:
        return self.home / "config.json"

    @property
    def nonces_path(self) -> Path:
        return self.home / "nonces.json"

    def load_config(self) -> CliConfig:
        if not self.config_path.exists():
            raise BadInput(f"no workspace at {self.home}; run `aitrail init` first")
        return CliConfig.from_json_obj(json.loads(self.config_path.read_text()))

    def key_path(self, name: str) -> Path:
        return self.home / "keys" / f"{name}.key"

    def load_key(self, name: str) -> SigningKey:
        path = self.key_path(name)
        if not path.exists():
            raise BadInput(f"no key named {name!r} in {path.parent}")
        return SigningKey.from_seed(bytes.fromhex(path.read_text().strip()))

    def create_key(self, name: str) -> SigningKey:
        path = self.key_path(name)
        if path.exists():
            return self.load_key(name)
        key = SigningKey.generate()
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(key.seed_bytes().hex())
        return key

    def resolve_ref(self, ref: str) -> str:
        """A DID string passes through; anything else is a local key name."""
        if ref.startswith(DID_PREFIX):
            return ref
        return self.load_key(ref).did

    def ca_key(self) -> SigningKey:
        cfg = self.load_config()
        return SigningKey.from_seed(bytes.fromhex(Path(cfg.ca_key_path).read_text().strip()))

    def ledger(self) -> Ledger:
        if self._ledger is None:
            cfg = self.load_config()
            self._ledger = Ledger(cfg.ledger_path)
        return self._ledger

    def identity(self) -> IdentityRegistry:
        if self._identity is None:
            cfg = self.load_config()
            self._identity = IdentityRegistry(
                self.ledger(),
                self.ca_key().address,
                DirectoryCredentialStore(self.home / "claims"),
                SystemConfig(replay_window=cfg.replay_window,
                             default_risk_level=cfg.default_erl,
                             default_attenuation=cfg.default_beta),
            )
            self._identity.load_nonces(self.nonces_path)
        return self._identity

    def trajectories(self) -> TrajectoryLog:
        return TrajectoryLog(self.ledger(), self.identity())


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _parse_claims(pairs: list[str]) -> dict[str, str]:
    claims = {}
    for pair in pairs:
        if "=" not in pair:
            raise BadInput(f"claims are key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        claims[key] = value
    return claims


# --- command implementations ---

def cmd_init(ws: Workspace, args) -> int:
    ws.home.mkdir(parents=True, exist_ok=True)
    if ws.config_path.exists() and not args.force:
        raise BadInput(f"workspace already initialized at {ws.home}")
    ca = ws.create_key("ca")
    cfg = CliConfig(
        ledger_path=str(ws.home / "ledger.log"),
        ca_key_path=str(ws.key_path("ca")),
        replay_window=args.replay_window,
        default_erl=args.default_erl,
        default_beta=args.default_beta,
        http_bind=args.bind,
    )
    ws.config_path.write_text(json.dumps(cfg.to_json_obj(), indent=2, sort_keys=True))
    identity = ws.identity()
    if not identity.is_registered(ca.address):
        identity.register_metadata(ca, "workspace://ca", functionality="credential authority")
    _emit({"home": str(ws.home), "caDid": ca.did, "config": cfg.to_json_obj()})
    return 0


def cmd_register(ws: Workspace, args) -> int:
    key = ws.create_key(args.name)
    node_type = NODE_TYPE_BY_LABEL[args.node_type]
    did = ws.identity().register_metadata(
        key, args.metadata_uri or f"workspace://meta/{args.name}",
        node_type=node_type, functionality=args.functionality,
        owner=ws.resolve_ref(args.owner) if args.owner else None)
    _emit(ws.identity().resolve_did(did).to_json_obj())
    return 0


def cmd_vc_apply(ws: Workspace, args) -> int:
    key = ws.load_key(args.name)
    claims = _parse_claims(args.claim)
    claim_bytes = encode_claims(claims)
    vc_hash = sha256(claim_bytes)
    uri = args.uri or f"workspace://vc/{args.name}/{vc_hash.hex()[:12]}"
    index = ws.identity().apply_vc(key, vc_hash, uri, claims=claims)
    _emit({"applicationIndex": index, "documentHash": vc_hash.hex(), "vcUri": uri})
    return 0


def cmd_vc_approve(ws: Workspace, args) -> int:
    vc = ws.identity().approve_vc(ws.ca_key(), ws.resolve_ref(args.applicant),
                                  expires_at=args.expires_at)
    _emit(vc.to_json_obj())
    return 0


def cmd_vc_reject(ws: Workspace, args) -> int:
    status = ws.identity().reject_vc(ws.ca_key(), ws.resolve_ref(args.applicant))
    _emit({"applicant": ws.resolve_ref(args.applicant), "status": status.value})
    return 0


def cmd_vc_revoke(ws: Workspace, args) -> int:
    vc_hash = bytes.fromhex(args.vc_hash)
    ws.identity().revoke_vc(ws.ca_key(), vc_hash)
    _emit({"vcHash": args.vc_hash, "revoked": True})
    return 0


def cmd_verify_vp(ws: Workspace, args) -> int:
    identity = ws.identity()
    if args.file:
        presentation = Presentation.from_json_obj(json.loads(Path(args.file).read_text()))
    else:
        if not (args.holder and args.vc_hash):
            raise BadInput("provide --file or both --holder and --vc-hash")
        holder = ws.load_key(args.holder)
        now = ws.ledger().clock.current
        nonce = bytes.fromhex(args.nonce) if args.nonce else os.urandom(16)
        timestamp = args.timestamp if args.timestamp is not None else now
        presentation = make_presentation(holder, bytes.fromhex(args.vc_hash), nonce, timestamp)
    now = args.now if args.now is not None else ws.ledger().clock.current
    result = identity.verify_presentation(presentation, now)
    identity.save_nonces(ws.nonces_path)
    _emit({"presentation": presentation.to_json_obj(), **result.to_json_obj()})
    return 0


def cmd_trajectory_issue(ws: Workspace, args) -> int:
    trajectory_id = ws.trajectories().issue_trajectory_id(
        ws.ca_key(), ws.resolve_ref(args.requester))
    _emit({"trajectoryId": trajectory_id.hex()})
    return 0


def _payload_hash_from_args(args) -> bytes:
    if args.payload_hash:
        return bytes.fromhex(args.payload_hash)
    if args.payload is not None:
        return sha256(args.payload.encode("utf-8"))
    raise BadInput("provide --payload or --payload-hash")


def cmd_trajectory_log(ws: Workspace, args) -> int:
    caller = ws.load_key(args.caller)
    callees = [ws.resolve_ref(c) for c in args.callees.split(",") if c]
    results = ws.trajectories().log_interaction(
        caller, callees, bytes.fromhex(args.id), args.action,
        _payload_hash_from_args(args))
    _emit({"records": [{"index": i, "recordHash": h.hex()} for i, h in results]})
    return 0


def cmd_trajectory_ack(ws: Workspace, args) -> int:
    callee = ws.load_key(args.callee)
    index, rhash = ws.trajectories().acknowledge(
        callee, ws.resolve_ref(args.caller), bytes.fromhex(args.id),
        _payload_hash_from_args(args))
    _emit({"index": index, "recordHash": rhash.hex()})
    return 0


def cmd_trajectory_reconcile(ws: Workspace, args) -> int:
    _emit(ws.trajectories().reconcile(bytes.fromhex(args.id)).to_json_obj())
    return 0


def _graph_for(ws: Workspace, args) -> graphmod.TrajectoryGraph:
    if getattr(args, "interval", None):
        t0, t1 = args.interval
        return graphmod.restore_interval(ws.ledger(), t0, t1)
    if not getattr(args, "id", None):
        raise BadInput("provide a trajectory id or --interval T0 T1")
    return graphmod.restore(ws.ledger(), bytes.fromhex(args.id))


def cmd_graph_restore(ws: Workspace, args) -> int:
    print(graphmod.export(_graph_for(ws, args), args.format))
    return 0


def cmd_graph_trace(ws: Workspace, args) -> int:
    _emit(graphmod.trace_source(_graph_for(ws, args), ws.resolve_ref(args.node)).to_json_obj())
    return 0


def cmd_graph_propagate(ws: Workspace, args) -> int:
    _emit(graphmod.propagation(_graph_for(ws, args), ws.resolve_ref(args.node)).to_json_obj())
    return 0


def cmd_graph_forks(ws: Workspace, args) -> int:
    _emit([f.to_json_obj() for f in graphmod.detect_forks(_graph_for(ws, args))])
    return 0


def cmd_graph_export(ws: Workspace, args) -> int:
    text = graphmod.export(_graph_for(ws, args), args.format)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        print(text)
    return 0


def cmd_risk_report(ws: Workspace, args) -> int:
    rep = riskmod.RiskReport(
        interval=(args.t0, args.t1),
        trajectory_ids=frozenset(bytes.fromhex(t) for t in args.trajectory) or None,
        suspected=frozenset(ws.resolve_ref(s) for s in args.suspect) or None,
        description=args.description,
    )
    index = riskmod.file_report(ws.ledger(), ws.ca_key(), rep)
    merged, suspects = riskmod.mark_suspects(ws.ledger(), rep)
    _emit({"reportIndex": index, "mergedNodes": sorted(merged.nodes),
           "suspects": sorted(suspects)})
    return 0


def _audit_from_report(ws: Workspace, index: int):
    rep = riskmod.load_report(ws.ledger(), index)
    merged, suspects = riskmod.mark_suspects(ws.ledger(), rep)
    finding = riskmod.audit_suspects(merged, suspects, rep.interval,
                                     ws.identity(), ws.trajectories())
    return rep, merged, finding


def cmd_risk_audit(ws: Workspace, args) -> int:
    _, _, finding = _audit_from_report(ws, args.report_index)
    _emit(finding.to_json_obj())
    return 0


def _diffusion_from_report(ws: Workspace, index: int):
    _, merged, finding = _audit_from_report(ws, index)
    identity = ws.identity()

    def level_of(did: str) -> int:
        return identity.resolve_did(did).risk_level

    def attenuation_of(did: str) -> int:
        return identity.resolve_did(did).attenuation

    return riskmod.diffuse_risk_levels(merged, finding.risk_nodes, level_of, attenuation_of)


def cmd_risk_diffuse(ws: Workspace, args) -> int:
    _emit(_diffusion_from_report(ws, args.report_index).to_json_obj())
    return 0


def cmd_risk_apply(ws: Workspace, args) -> int:
    result = _diffusion_from_report(ws, args.report_index)
    indices = riskmod.apply_updates(ws.ca_key(), ws.identity(), result)
    _emit({"diffusion": result.to_json_obj(), "ledgerIndices": indices})
    return 0


def cmd_scenario_run(ws: Workspace, args) -> int:
    report_dir = Path(args.report_dir) if args.report_dir else None
    if args.batch:
        result = harness.run_standard_batch(
            seeds=args.seeds, base_seed=args.seed,
            ledger_dir=report_dir / "ledgers" if report_dir else None)
    else:
        if args.spec:
            spec = harness.ScenarioSpec.from_json(Path(args.spec).read_text())
        elif args.preset:
            spec = harness.preset(args.preset, seed=args.seed)
        else:
            raise BadInput("provide a scenario file, --preset, or --batch")
        result = harness.run_single_spec(spec)
    if report_dir is not None:
        written = report.write_batch_report(result, report_dir)
        print("\n".join(str(p) for p in written), file=sys.stderr)
    print(result.metrics.to_json())
    return 0


def cmd_scenario_metrics(ws: Workspace, args) -> int:
    metrics_path = Path(args.report_dir) / "metrics.json"
    if not metrics_path.exists():
        raise BadInput(f"no metrics.json under {args.report_dir}")
    obj = json.loads(metrics_path.read_text())
    metrics = harness.Metrics(
        integrity_validation=obj["integrityValidation"],
        tamper_rejection=obj["tamperRejection"],
        audit_trail=obj["auditTrail"],
        attribution_accuracy=obj["attributionAccuracy"],
        multihop_traceability=obj["multihopTraceability"],
        path_fork_accuracy=obj["pathForkAccuracy"],
        counts=obj.get("counts", {}),
    )
    print(metrics.text_table())
    return 0


def cmd_load_estimate(ws: Workspace, args) -> int:
    platforms = []
    for spec in args.platform:
        if "=" not in spec:
            raise BadInput(f"platforms are NAME=DAILY_USERS, got {spec!r}")
        name, users = spec.split("=", 1)
        platforms.append((name, int(users)))
    estimate = load_estimate(platforms, args.per_capita, args.reference_tps)
    _emit(estimate.to_json_obj())
    return 0


def cmd_serve(ws: Workspace, args) -> int:
    cfg = ws.load_config()
    bind = args.bind or cfg.http_bind
    host, _, port = bind.partition(":")
    facade = AuditFacade(ws.ledger(), ws.identity(), host=host, port=int(port or 0))
    actual_host, actual_port = facade.address
    print(f"serving read-only audit facade on http://{actual_host}:{actual_port}",
          file=sys.stderr)
    try:
        facade.serve_forever()
    except KeyboardInterrupt:
        facade.shutdown()
    return 0


def cmd_verify_chain(ws: Workspace, args) -> int:
    report_obj = ws.ledger().verify_chain()
    _emit(report_obj.to_json_obj())
    return 0 if report_obj.valid else 1


# --- argument parsing ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aitrail",
        description="verifiable identities, interaction trajectories and risk "
                    "diffusion over a tamper-evident ledger")
    parser.add_argument("--home", help="workspace directory "
                        "(default $AITRAIL_HOME or .aitrail)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create a workspace, authority key and ledger")
    p.add_argument("--replay-window", type=int, default=300)
    p.add_argument("--default-erl", type=int, default=0)
    p.add_argument("--default-beta", type=int, default=500)
    p.add_argument("--bind", default="127.0.0.1:8350")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("register", help="register an entity and its DID document")
    p.add_argument("name")
    p.add_argument("--node-type", choices=sorted(NODE_TYPE_BY_LABEL), default="AiAgent")
    p.add_argument("--functionality", default="")
    p.add_argument("--owner")
    p.add_argument("--metadata-uri")
    p.set_defaults(func=cmd_register)

    vc = sub.add_parser("vc", help="credential lifecycle").add_subparsers(
        dest="vc_command", required=True)
    p = vc.add_parser("apply")
    p.add_argument("name")
    p.add_argument("--claim", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--uri")
    p.set_defaults(func=cmd_vc_apply)
    p = vc.add_parser("approve")
    p.add_argument("applicant")
    p.add_argument("--expires-at", type=int)
    p.set_defaults(func=cmd_vc_approve)
    p = vc.add_parser("reject")
    p.add_argument("applicant")
    p.set_defaults(func=cmd_vc_reject)
    p = vc.add_parser("revoke")
    p.add_argument("vc_hash")
    p.set_defaults(func=cmd_vc_revoke)

    p = sub.add_parser("verify-vp", help="verify a credential presentation")
    p.add_argument("--file", help="presentation JSON to verify")
    p.add_argument("--holder", help="build a presentation with this local key")
    p.add_argument("--vc-hash")
    p.add_argument("--nonce")
    p.add_argument("--timestamp", type=int)
    p.add_argument("--now", type=int)
    p.set_defaults(func=cmd_verify_vp)

    tr = sub.add_parser("trajectory", help="trajectory ids, events, receipts").add_subparsers(
        dest="trajectory_command", required=True)
    p = tr.add_parser("issue")
    p.add_argument("--requester", required=True)
    p.set_defaults(func=cmd_trajectory_issue)
    p = tr.add_parser("log")
    p.add_argument("--caller", required=True)
    p.add_argument("--callees", required=True, help="comma-separated names or DIDs")
    p.add_argument("--id", required=True)
    p.add_argument("--action", default="request")
    p.add_argument("--payload")
    p.add_argument("--payload-hash")
    p.set_defaults(func=cmd_trajectory_log)
    p = tr.add_parser("ack")
    p.add_argument("--callee", required=True)
    p.add_argument("--caller", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--payload")
    p.add_argument("--payload-hash")
    p.set_defaults(func=cmd_trajectory_ack)
    p = tr.add_parser("reconcile")
    p.add_argument("--id", required=True)
    p.set_defaults(func=cmd_trajectory_reconcile)

    gr = sub.add_parser("graph", help="restore and analyse interaction graphs").add_subparsers(
        dest="graph_command", required=True)

    def graph_source(p):
        p.add_argument("id", nargs="?", help="trajectory id (hex)")
        p.add_argument("--interval", nargs=2, type=int, metavar=("T0", "T1"))

    p = gr.add_parser("restore")
    graph_source(p)
    p.add_argument("--format", choices=["json", "dot"], default="json")
    p.set_defaults(func=cmd_graph_restore)
    p = gr.add_parser("trace")
    graph_source(p)
    p.add_argument("node")
    p.set_defaults(func=cmd_graph_trace)
    p = gr.add_parser("propagate")
    graph_source(p)
    p.add_argument("node")
    p.set_defaults(func=cmd_graph_propagate)
    p = gr.add_parser("forks")
    graph_source(p)
    p.set_defaults(func=cmd_graph_forks)
    p = gr.add_parser("export")
    graph_source(p)
    p.add_argument("--format", choices=["json", "dot"], default="dot")
    p.add_argument("--out")
    p.set_defaults(func=cmd_graph_export)

    rk = sub.add_parser("risk", help="risk reports, audits and diffusion").add_subparsers(
        dest="risk_command", required=True)
    p = rk.add_parser("report")
    p.add_argument("--t0", type=int, required=True)
    p.add_argument("--t1", type=int, required=True)
    p.add_argument("--trajectory", action="append", default=[])
    p.add_argument("--suspect", action="append", default=[])
    p.add_argument("--description", default="")
    p.set_defaults(func=cmd_risk_report)
    for name, func in (("audit", cmd_risk_audit), ("diffuse", cmd_risk_diffuse),
                       ("apply", cmd_risk_apply)):
        p = rk.add_parser(name)
        p.add_argument("--report-index", type=int, required=True)
        p.set_defaults(func=func)

    sc = sub.add_parser("scenario", help="deterministic simulation runs").add_subparsers(
        dest="scenario_command", required=True)
    p = sc.add_parser("run")
    p.add_argument("spec", nargs="?", help="scenario JSON file")
    p.add_argument("--preset", choices=harness.preset_names())
    p.add_argument("--batch", action="store_true", help="run the full replication batch")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--seeds", type=int, default=25, help="seeds per preset in batch mode")
    p.add_argument("--report-dir")
    p.set_defaults(func=cmd_scenario_run)
    p = sc.add_parser("metrics")
    p.add_argument("--report-dir", required=True)
    p.set_defaults(func=cmd_scenario_metrics)

    p = sub.add_parser("load-estimate", help="chain capacity planning")
    p.add_argument("--platform", action="append", required=True, metavar="NAME=DAILY_USERS")
    p.add_argument("--per-capita", type=int, default=100)
    p.add_argument("--reference-tps", type=int, required=True)
    p.set_defaults(func=cmd_load_estimate)

    p = sub.add_parser("serve", help="read-only HTTP audit facade")
    p.add_argument("--bind")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("verify-chain", help="check every ledger record invariant")
    p.set_defaults(func=cmd_verify_chain)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    home = Path(args.home or os.environ.get("AITRAIL_HOME", ".aitrail"))
    ws = Workspace(home)
    try:
        return args.func(ws, args)
    except AitrailError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
