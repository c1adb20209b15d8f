"""Deterministic scenario simulator and indicator computation.

A scenario describes a roster of entities, an ordered call flow, and the
faults to inject: interruptions (a step and everything downstream never
happens), tampering (the callee acknowledges with a corrupted hash), and
missing info (the callee stays silent). Identity attacks are simulated
against the credential layer. Keys, nonces and payload hashes all derive
from the scenario seed, so a rerun reproduces the ledger bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import graph as graphmod
from . import risk as riskmod
from .encoding import encode_claims
from .identity import (
    IdentityRegistry,
    InMemoryCredentialStore,
    Presentation,
    SystemConfig,
    VerifiableCredential,
    make_presentation,
)
from .keys import SigningKey, derived_nonce, sha256
from .ledger import Ledger
from .records import NODE_TYPE_BY_LABEL, NodeType
from .trajectory import TrajectoryLog

ANOMALY_KINDS = ("Interruption", "Tampering", "MissingInfo")
ATTACK_KINDS = ("VcForgery", "VcTransfer", "Replay", "RevokedUse")


@dataclass(frozen=True)
class FlowStep:
    caller: str
    callees: tuple[str, ...]
    action_type: str


@dataclass(frozen=True)
class Anomaly:
    step: int
    kind: str


@dataclass(frozen=True)
class Attack:
    kind: str
    target: str


@dataclass
class ScenarioSpec:
    name: str
    seed: int
    roster: list[tuple[str, NodeType]]
    flow: list[FlowStep] = field(default_factory=list)
    anomalies: list[Anomaly] = field(default_factory=list)
    attacks: list[Attack] = field(default_factory=list)

    def validate(self) -> None:
        names = {name for name, _ in self.roster}
        if not names:
            raise ValueError("roster must not be empty")
        for step in self.flow:
            if step.caller not in names:
                raise ValueError(f"unknown caller {step.caller!r}")
            for callee in step.callees:
                if callee not in names:
                    raise ValueError(f"unknown callee {callee!r}")
        for anomaly in self.anomalies:
            if not (0 <= anomaly.step < len(self.flow)):
                raise ValueError(f"anomaly step {anomaly.step} out of range")
            if anomaly.kind not in ANOMALY_KINDS:
                raise ValueError(f"unknown anomaly kind {anomaly.kind!r}")
        for attack in self.attacks:
            if attack.kind not in ATTACK_KINDS:
                raise ValueError(f"unknown attack kind {attack.kind!r}")
            if attack.target not in names:
                raise ValueError(f"unknown attack target {attack.target!r}")

    def to_json_obj(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "roster": [{"name": n, "nodeType": t.label} for n, t in self.roster],
            "flow": [{"caller": s.caller, "callees": list(s.callees),
                      "actionType": s.action_type} for s in self.flow],
            "anomalies": [{"step": a.step, "kind": a.kind} for a in self.anomalies],
            "attacks": [{"kind": a.kind, "target": a.target} for a in self.attacks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2, sort_keys=True)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ScenarioSpec":
        spec = cls(
            name=obj.get("name", "scenario"),
            seed=int(obj["seed"]),
            roster=[(r["name"], NODE_TYPE_BY_LABEL[r["nodeType"]]) for r in obj["roster"]],
            flow=[FlowStep(s["caller"], tuple(s["callees"]), s["actionType"])
                  for s in obj.get("flow", [])],
            anomalies=[Anomaly(a["step"], a["kind"]) for a in obj.get("anomalies", [])],
            attacks=[Attack(a["kind"], a["target"]) for a in obj.get("attacks", [])],
        )
        spec.validate()
        return spec

    @classmethod
    def from_json(cls, text: str) -> "ScenarioSpec":
        return cls.from_json_obj(json.loads(text))


@dataclass
class Environment:
    """A fresh ledger with the authority, the originating user, and a fully
    registered, credentialed roster."""

    seed: int
    ledger: Ledger
    identity: IdentityRegistry
    trajectories: TrajectoryLog
    ca: SigningKey
    user: SigningKey
    keys: dict[str, SigningKey]
    credentials: dict[str, VerifiableCredential]
    _nonce_counter: int = 0

    def did(self, name: str) -> str:
        return self.keys[name].did

    def next_nonce(self) -> bytes:
        self._nonce_counter += 1
        return derived_nonce(self.seed, self._nonce_counter)


def build_network(spec: ScenarioSpec, ledger_path: Path | str | None = None,
                  config: SystemConfig | None = None) -> Environment:
    """Register and credential every roster entity on a fresh ledger."""
    spec.validate()
    ledger = Ledger(ledger_path)
    ca = SigningKey.derive(spec.seed, "ca")
    user = SigningKey.derive(spec.seed, "user")
    identity = IdentityRegistry(ledger, ca.address, InMemoryCredentialStore(), config)
    identity.register_metadata(ca, "mem://ca", node_type=NodeType.AI_AGENT,
                               functionality="credential authority")
    identity.register_metadata(user, "mem://user", node_type=NodeType.AI_AGENT,
                               functionality="originating user", owner=ca.did)

    keys: dict[str, SigningKey] = {}
    credentials: dict[str, VerifiableCredential] = {}
    for name, node_type in spec.roster:
        key = SigningKey.derive(spec.seed, f"node:{name}")
        keys[name] = key
        identity.register_metadata(key, f"mem://meta/{name}", node_type=node_type,
                                   functionality=f"{node_type.label} {name}",
                                   owner=user.did)
        claims = {"capability": node_type.label, "node": name}
        claim_bytes = encode_claims(claims)
        uri = f"mem://vc/{name}"
        identity.apply_vc(key, sha256(claim_bytes), uri, claims=claims)
        credentials[name] = identity.approve_vc(ca, key.did)

    trajectories = TrajectoryLog(ledger, identity)
    return Environment(seed=spec.seed, ledger=ledger, identity=identity,
                       trajectories=trajectories, ca=ca, user=user,
                       keys=keys, credentials=credentials)


@dataclass
class GroundTruthStep:
    index: int
    caller: str
    callees: tuple[str, ...]
    action_type: str
    performed: bool
    anomaly: str | None
    event_indices: tuple[int, ...] = ()


@dataclass
class FlowRun:
    trajectory_id: bytes
    steps: list[GroundTruthStep]
    culprits: set[str]  # dids expected to be found responsible

    @property
    def performed_edges(self) -> list[tuple[str, str, str]]:
        """(caller name, callee name, action) for every interaction that
        actually happened."""
        out = []
        for step in self.steps:
            if step.performed:
                out.extend((step.caller, callee, step.action_type)
                           for callee in step.callees)
        return out

    @property
    def intended_count(self) -> int:
        return sum(len(step.callees) for step in self.steps)


def _payload_hash(seed: int, step: int, caller: str, callee: str) -> bytes:
    return sha256(f"payload|{seed}|{step}|{caller}|{callee}".encode())


def _corrupt(data: bytes) -> bytes:
    return bytes([data[0] ^ 0x01]) + data[1:]


def run_flow(env: Environment, spec: ScenarioSpec) -> FlowRun:
    """Execute the flow, injecting the declared anomalies, and keep ground
    truth of what should have happened."""
    anomaly_at = {a.step: a.kind for a in spec.anomalies}
    requester = spec.flow[0].caller
    trajectory_id = env.trajectories.issue_trajectory_id(env.ca, env.did(requester))
    steps: list[GroundTruthStep] = []
    culprits: set[str] = set()
    interrupted = False

    for i, step in enumerate(spec.flow):
        kind = anomaly_at.get(i)
        if interrupted or kind == "Interruption":
            interrupted = True
            steps.append(GroundTruthStep(i, step.caller, step.callees,
                                         step.action_type, False, kind))
            continue

        caller_key = env.keys[step.caller]
        callee_dids = [env.did(c) for c in step.callees]
        payload_hash = _payload_hash(spec.seed, i, step.caller, step.callees[0])
        logged = env.trajectories.log_interaction(
            caller_key, callee_dids, trajectory_id, step.action_type, payload_hash)
        for callee in step.callees:
            callee_key = env.keys[callee]
            if kind == "MissingInfo":
                culprits.add(callee_key.did)
                continue
            ack_hash = payload_hash
            if kind == "Tampering":
                ack_hash = _corrupt(payload_hash)
                culprits.add(callee_key.did)
            env.trajectories.acknowledge(callee_key, caller_key.did,
                                         trajectory_id, ack_hash)
        steps.append(GroundTruthStep(i, step.caller, step.callees, step.action_type,
                                     True, kind,
                                     tuple(index for index, _ in logged)))

    return FlowRun(trajectory_id=trajectory_id, steps=steps, culprits=culprits)


@dataclass(frozen=True)
class AttackOutcome:
    kind: str
    target: str
    rejected: bool
    reason: str | None

    def to_json_obj(self) -> dict:
        return {"kind": self.kind, "target": self.target,
                "rejected": self.rejected, "reason": self.reason}


def _present(env: Environment, holder: SigningKey, vc_hash: bytes,
             timestamp: int | None = None) -> Presentation:
    now = env.ledger.clock.current
    return make_presentation(holder, vc_hash, env.next_nonce(),
                             timestamp if timestamp is not None else now)


def run_attack(env: Environment, attack: Attack, instance: int = 0) -> AttackOutcome:
    """Mount one identity attack and record the verifier's verdict."""
    identity = env.identity
    target = attack.target
    target_key = env.keys[target]
    vc = env.credentials[target]
    now = env.ledger.clock.current

    if attack.kind == "VcForgery":
        # tamper the stored claims document, present, then restore it
        original = identity.store.get(vc.vc_uri)
        identity.store.put(vc.vc_uri, _corrupt(original))
        try:
            outcome = identity.verify_presentation(_present(env, target_key, vc.vc_hash), now)
        finally:
            identity.store.put(vc.vc_uri, original)
    elif attack.kind == "VcTransfer":
        others = [n for n in env.keys if n != target]
        impostor = env.keys[others[instance % len(others)]]
        outcome = identity.verify_presentation(_present(env, impostor, vc.vc_hash), now)
    elif attack.kind == "Replay":
        presentation = _present(env, target_key, vc.vc_hash)
        primed = identity.verify_presentation(presentation, now)
        if not primed.accepted:  # the intercepted presentation must be valid
            raise RuntimeError(f"replay priming failed: {primed.reason}")
        outcome = identity.verify_presentation(presentation, now)
    elif attack.kind == "RevokedUse":
        claims = {"capability": "disposable", "instance": str(instance)}
        uri = f"mem://vc/{target}/revoked/{instance}"
        identity.apply_vc(target_key, sha256(encode_claims(claims)), uri, claims=claims)
        disposable = identity.approve_vc(env.ca, target_key.did)
        identity.revoke_vc(env.ca, disposable.vc_hash)
        outcome = identity.verify_presentation(
            _present(env, target_key, disposable.vc_hash), env.ledger.clock.current)
    else:
        raise ValueError(f"unknown attack kind: {attack.kind}")

    return AttackOutcome(kind=attack.kind, target=target,
                         rejected=not outcome.accepted,
                         reason=outcome.reason.value if outcome.reason else None)


def run_attack_suite(env: Environment, targets: list[str] | None = None,
                     instances: int = 1) -> list[AttackOutcome]:
    """All four attack constructions, `instances` times each."""
    if targets is None:
        targets = [next(iter(env.keys))]
    outcomes = []
    for i in range(instances):
        target = targets[i % len(targets)]
        for kind in ATTACK_KINDS:
            outcomes.append(run_attack(env, Attack(kind, target), instance=i))
    return outcomes


def run_legitimate_presentations(env: Environment, count: int) -> list[bool]:
    """Honest presentations with fresh nonces inside the replay window."""
    names = sorted(env.keys)
    results = []
    window = env.identity.config.replay_window
    for i in range(count):
        name = names[i % len(names)]
        now = env.ledger.clock.current
        age = i % max(1, min(window, 5))
        presentation = _present(env, env.keys[name], env.credentials[name].vc_hash,
                                timestamp=max(0, now - age))
        results.append(env.identity.verify_presentation(presentation, now).accepted)
    return results


@dataclass
class ScenarioOutcome:
    spec: ScenarioSpec
    flow: FlowRun | None
    recorded_events: int
    audit_finding: riskmod.AuditFinding | None
    restored: graphmod.TrajectoryGraph | None
    attribution_expected: set[str]
    multihop_ok: bool
    fork_expected: set[tuple[str, frozenset[str]]]
    fork_found: set[tuple[str, frozenset[str]]]

    @property
    def performed_count(self) -> int:
        return len(self.flow.performed_edges) if self.flow else 0

    @property
    def has_culprits(self) -> bool:
        return bool(self.attribution_expected)

    @property
    def attribution_ok(self) -> bool:
        found = self.audit_finding.risk_nodes if self.audit_finding else set()
        return found == self.attribution_expected

    @property
    def is_fork_scenario(self) -> bool:
        return bool(self.fork_expected)

    @property
    def fork_ok(self) -> bool:
        return self.fork_found == self.fork_expected


def _ancestors(edges: list[tuple[str, str]]) -> dict[str, set[str]]:
    nodes = {n for e in edges for n in e}
    reach = {n: set() for n in nodes}
    changed = True
    while changed:
        changed = False
        for caller, callee in edges:
            grown = reach[callee] | {caller} | reach[caller]
            if grown != reach[callee]:
                reach[callee] = grown
                changed = True
    return reach


def run_scenario(spec: ScenarioSpec, ledger_path: Path | str | None = None) -> ScenarioOutcome:
    """Build, execute, and audit one scenario end to end."""
    env = build_network(spec, ledger_path)
    if not spec.flow:
        env.ledger.close()
        return ScenarioOutcome(spec, None, 0, None, None, set(), True, set(), set())

    flow = run_flow(env, spec)
    restored = graphmod.restore(env.ledger, flow.trajectory_id)

    # recorded-vs-performed comparison is by (caller, callee, action) multiset
    performed = sorted((env.did(c), env.did(d), a) for c, d, a in flow.performed_edges)
    recorded = sorted((e.caller, e.callee, e.action_type) for e in restored.edges)
    recorded_events = len(recorded)

    multihop_ok = recorded == performed
    if multihop_ok:
        expected_ancestors = _ancestors([(c, d) for c, d, _ in performed])
        for node in restored.nodes:
            got = graphmod.trace_source(restored, node).reached
            if got != frozenset(expected_ancestors.get(node, set())):
                multihop_ok = False
                break

    fork_expected = set()
    for step in flow.steps:
        if step.performed and len(step.callees) >= 2:
            fork_expected.add((env.did(step.caller),
                               frozenset(env.did(c) for c in step.callees)))
    fork_found = {(f.node, frozenset(e.callee for e in f.out_edges))
                  for f in graphmod.detect_forks(restored)}

    report = riskmod.RiskReport(interval=(0, env.ledger.clock.current),
                                description=f"audit of {spec.name}")
    merged, suspects = riskmod.mark_suspects(env.ledger, report)
    finding = riskmod.audit_suspects(merged, suspects, report.interval,
                                     env.identity, env.trajectories)

    env.ledger.close()
    return ScenarioOutcome(
        spec=spec,
        flow=flow,
        recorded_events=recorded_events,
        audit_finding=finding,
        restored=restored,
        attribution_expected=set(flow.culprits),
        multihop_ok=multihop_ok,
        fork_expected=fork_expected,
        fork_found=fork_found,
    )


# --- metrics ---

@dataclass
class Metrics:
    integrity_validation: float
    tamper_rejection: float
    audit_trail: float
    attribution_accuracy: float
    multihop_traceability: float
    path_fork_accuracy: float | None  # None when no fork scenario ran
    counts: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "integrityValidation": self.integrity_validation,
            "tamperRejection": self.tamper_rejection,
            "auditTrail": self.audit_trail,
            "attributionAccuracy": self.attribution_accuracy,
            "multihopTraceability": self.multihop_traceability,
            "pathForkAccuracy": self.path_fork_accuracy,
            "counts": self.counts,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2, sort_keys=True)

    def text_table(self) -> str:
        def pct(value: float | None) -> str:
            return "n/a" if value is None else f"{value * 100:.1f}%"

        left = [("Integrity Validation", pct(self.integrity_validation)),
                ("Tamper Rejection", pct(self.tamper_rejection)),
                ("--", "--"), ("--", "--")]
        right = [("Audit Trail", pct(self.audit_trail)),
                 ("Attribution Accuracy", pct(self.attribution_accuracy)),
                 ("Multi-hop Traceability", pct(self.multihop_traceability)),
                 ("Path Fork Accuracy", pct(self.path_fork_accuracy))]
        lines = [
            f"{'trustworthiness verification':<38}{'Traceability verification'}",
            f"{'indicator':<24}{'result':<14}{'indicator':<26}{'result'}",
        ]
        for (li, lr), (ri, rr) in zip(left, right):
            lines.append(f"{li:<24}{lr:<14}{ri:<26}{rr}")
        return "\n".join(lines)


def compute_metrics(scenario_outcomes: list[ScenarioOutcome],
                    attack_outcomes: list[AttackOutcome],
                    legitimate_accepted: list[bool]) -> Metrics:
    accepted = sum(legitimate_accepted)
    rejected = sum(1 for a in attack_outcomes if a.rejected)

    performed_total = sum(o.performed_count for o in scenario_outcomes)
    recorded_total = sum(min(o.recorded_events, o.performed_count)
                         for o in scenario_outcomes)

    with_culprits = [o for o in scenario_outcomes if o.has_culprits]
    fork_scenarios = [o for o in scenario_outcomes if o.is_fork_scenario]

    def ratio(num: int, den: int) -> float:
        return num / den if den else 1.0

    return Metrics(
        integrity_validation=ratio(accepted, len(legitimate_accepted)),
        tamper_rejection=ratio(rejected, len(attack_outcomes)),
        audit_trail=ratio(recorded_total, performed_total),
        attribution_accuracy=ratio(sum(1 for o in with_culprits if o.attribution_ok),
                                   len(with_culprits)),
        multihop_traceability=ratio(sum(1 for o in scenario_outcomes if o.multihop_ok),
                                    len(scenario_outcomes)),
        path_fork_accuracy=(ratio(sum(1 for o in fork_scenarios if o.fork_ok),
                                  len(fork_scenarios)) if fork_scenarios else None),
        counts={
            "legitimatePresentations": len(legitimate_accepted),
            "attacks": len(attack_outcomes),
            "scenarios": len(scenario_outcomes),
            "scenariosWithCulprits": len(with_culprits),
            "forkScenarios": len(fork_scenarios),
            "performedInteractions": performed_total,
            "recordedInteractions": recorded_total,
        },
    )


# --- preset library ---

_SEQUENTIAL_ROSTER = [
    ("A", NodeType.LARGE_LANGUAGE_MODEL),
    ("B", NodeType.DECISION_SUPPORT_SYSTEM),
    ("C", NodeType.DATA_PROCESSING_MODULE),
    ("D", NodeType.MCP_SERVER),
]

_PARALLEL_ROSTER = [
    ("A", NodeType.LARGE_LANGUAGE_MODEL),
    ("B1", NodeType.DATA_PROCESSING_MODULE),
    ("B2", NodeType.DATA_PROCESSING_MODULE),
    ("C", NodeType.DECISION_SUPPORT_SYSTEM),
]

_VARIANTS = {
    "clean": [],
    "interruption": [Anomaly(1, "Interruption")],
    "tampering": [Anomaly(1, "Tampering")],
    "missing-info": [Anomaly(1, "MissingInfo")],
}


def preset_names() -> list[str]:
    names = [f"{base}-{variant}" for base in ("sequential-4", "parallel-fork")
             for variant in _VARIANTS]
    return names + ["attack-suite"]


def preset(name: str, seed: int = 1) -> ScenarioSpec:
    if name == "attack-suite":
        spec = ScenarioSpec(
            name=name, seed=seed,
            roster=_SEQUENTIAL_ROSTER[:2],
            attacks=[Attack(kind, "A") for kind in ATTACK_KINDS],
        )
        spec.validate()
        return spec
    for prefix, roster, flow in (
        ("sequential-4", _SEQUENTIAL_ROSTER, [
            FlowStep("A", ("B",), "request"),
            FlowStep("B", ("C",), "tool_call"),
            FlowStep("C", ("D",), "delegate"),
        ]),
        ("parallel-fork", _PARALLEL_ROSTER, [
            FlowStep("A", ("B1", "B2"), "request"),
            FlowStep("B1", ("C",), "response"),
            FlowStep("B2", ("C",), "response"),
        ]),
    ):
        for variant, anomalies in _VARIANTS.items():
            if name == f"{prefix}-{variant}":
                spec = ScenarioSpec(name=name, seed=seed, roster=list(roster),
                                    flow=list(flow), anomalies=list(anomalies))
                spec.validate()
                return spec
    raise KeyError(f"unknown preset: {name}")


@dataclass
class BatchResult:
    scenario_outcomes: list[ScenarioOutcome]
    attack_outcomes: list[AttackOutcome]
    legitimate_accepted: list[bool]
    metrics: Metrics


def run_single_spec(spec: ScenarioSpec, ledger_path: Path | str | None = None,
                    legitimate: int = 10) -> BatchResult:
    """Run one scenario file: its flow (if any) and its attacks (if any)."""
    spec.validate()
    scenario_outcomes = []
    attack_outcomes = []
    legitimate_accepted: list[bool] = []
    if spec.flow:
        scenario_outcomes.append(run_scenario(spec, ledger_path))
    if spec.attacks:
        env = build_network(spec)
        for attack in spec.attacks:
            attack_outcomes.append(run_attack(env, attack))
        legitimate_accepted = run_legitimate_presentations(env, legitimate)
        env.ledger.close()
    metrics = compute_metrics(scenario_outcomes, attack_outcomes, legitimate_accepted)
    return BatchResult(scenario_outcomes, attack_outcomes, legitimate_accepted, metrics)


def run_standard_batch(seeds: int = 25, base_seed: int = 1,
                       ledger_dir: Path | str | None = None,
                       legitimate: int = 100, attack_instances: int = 25) -> BatchResult:
    """The replication suite: every flow preset across `seeds` seeds plus the
    identity experiment (legitimate presentations and the four attacks)."""
    outdir = Path(ledger_dir) if ledger_dir is not None else None
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)

    scenario_outcomes = []
    flow_presets = [n for n in preset_names() if n != "attack-suite"]
    for preset_name in flow_presets:
        for i in range(seeds):
            seed = base_seed + i
            spec = preset(preset_name, seed=seed)
            path = outdir / f"{preset_name}-{i:03d}.ledger" if outdir else None
            scenario_outcomes.append(run_scenario(spec, path))

    attack_env = build_network(preset("attack-suite", seed=base_seed))
    targets = sorted(attack_env.keys)
    attack_outcomes = run_attack_suite(attack_env, targets=targets,
                                       instances=attack_instances)
    legitimate_accepted = run_legitimate_presentations(attack_env, legitimate)
    attack_env.ledger.close()

    metrics = compute_metrics(scenario_outcomes, attack_outcomes, legitimate_accepted)
    return BatchResult(scenario_outcomes, attack_outcomes, legitimate_accepted, metrics)
