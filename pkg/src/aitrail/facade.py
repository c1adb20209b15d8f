"""Read-only HTTP facade for auditors.

Three GET endpoints over a ledger snapshot: the restored graph of a
trajectory, a DID document, and an entity's current risk level. Responses
are byte-identical to what the CLI prints for the same query. Nothing here
can mutate state.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import graph as graphmod
from .errors import NotFound, UnknownDid
from .identity import IdentityRegistry
from .ledger import Ledger

_TRAJECTORY_RE = re.compile(r"^/trajectory/([0-9a-fA-F]{32})$")
_DID_RE = re.compile(r"^/(did|risk)/(did:aat:[0-9a-fA-F]{64})$")
_MALFORMED_RE = re.compile(r"^/(trajectory|did|risk)/")


def _trajectory_body(ledger: Ledger, trajectory_id: bytes) -> str:
    return graphmod.export(graphmod.restore(ledger, trajectory_id), "json") + "\n"


def _did_body(identity: IdentityRegistry, did: str) -> str:
    doc = identity.resolve_did(did)
    return json.dumps(doc.to_json_obj(), indent=2, sort_keys=True) + "\n"


def _risk_body(identity: IdentityRegistry, did: str) -> str:
    doc = identity.resolve_did(did)
    return json.dumps({"did": doc.did, "erl": doc.risk_level, "version": doc.version},
                      indent=2, sort_keys=True) + "\n"


class _Handler(BaseHTTPRequestHandler):
    ledger: Ledger
    identity: IdentityRegistry

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, body: str) -> None:
        data = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _error(self, status: int, message: str) -> None:
        self._send(status, json.dumps({"error": message}) + "\n")

    def do_GET(self) -> None:  # noqa: N802 - http.server API
        m = _TRAJECTORY_RE.match(self.path)
        if m:
            trajectory_id = bytes.fromhex(m.group(1))
            try:
                self._send(200, _trajectory_body(self.ledger, trajectory_id))
            except NotFound:
                self._error(404, f"trajectory {m.group(1)} not issued")
            return
        m = _DID_RE.match(self.path)
        if m:
            endpoint, did = m.groups()
            try:
                body = (_did_body if endpoint == "did" else _risk_body)(self.identity, did)
                self._send(200, body)
            except UnknownDid:
                self._error(404, f"unknown DID {did}")
            return
        if _MALFORMED_RE.match(self.path):
            self._error(400, f"malformed identifier in {self.path}")
            return
        self._error(404, f"no such endpoint: {self.path}")


class AuditFacade:
    """Owns the HTTP server; start() binds, serve_forever() blocks."""

    def __init__(self, ledger: Ledger, identity: IdentityRegistry,
                 host: str = "127.0.0.1", port: int = 0) -> None:
        handler = type("BoundHandler", (_Handler,), {"ledger": ledger, "identity": identity})
        self.server = ThreadingHTTPServer((host, port), handler)

    @property
    def address(self) -> tuple[str, int]:
        return self.server.server_address[:2]

    def serve_forever(self) -> None:
        self.server.serve_forever()

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread

    def shutdown(self) -> None:
        self.server.shutdown()
        self.server.server_close()
