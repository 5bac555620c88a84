"""Operator REST API (and static host for the admin console).

Authentication is a static API key in `X-Admin-Key`, checked against salted
hashes; the operator plane is deliberately independent of the OAuth stack it
manages. Every write lands in the audit chain before the response is sent.
"""

from __future__ import annotations

import hashlib
import json
import mimetypes
import os
import queue
import secrets
from typing import Dict, Iterator, Optional

from .httpmodel import HttpExchange, Response
from .policy import BanEntry, OPERATOR_BAN_TTL
from .registry import OnboardError


class PrincipalStore:
    """API keys live only as salted hashes; lookup re-hashes the presented key."""

    def __init__(self, specs):
        self._salt = secrets.token_hex(16)
        self._by_hash: Dict[str, tuple] = {}
        for spec in specs:
            digest = self._hash(spec.api_key)
            self._by_hash[digest] = (spec.name, spec.permissions)

    def _hash(self, key: str) -> str:
        return hashlib.sha256((self._salt + key).encode("utf-8")).hexdigest()

    def authenticate(self, key: Optional[str]) -> Optional[tuple]:
        if not key:
            return None
        return self._by_hash.get(self._hash(key))


def _json_resp(status: int, payload) -> Response:
    return Response(
        status=status,
        headers=[("Content-Type", "application/json")],
        body=json.dumps(payload).encode("utf-8"),
    )


class AdminApi:
    def __init__(self, gateway, ui_dir: Optional[str] = None):
        self.gw = gateway
        self.principals = PrincipalStore(gateway.config.admin.principals if gateway.config.admin else [])
        if ui_dir is None:
            candidate = os.path.join(os.getcwd(), "frontend", "dist")
            ui_dir = candidate if os.path.isdir(candidate) else None
        self.ui_dir = ui_dir

    # -- handlers ----------------------------------------------------------

    def handle(self, req: HttpExchange) -> Response:
        path = req.path
        if path == "/admin/ui" or path.startswith("/admin/ui/"):
            return self._serve_ui(path)

        principal = self.principals.authenticate(req.headers.get("X-Admin-Key"))
        if principal is None:
            return _json_resp(401, {"error": "missing or invalid admin key"})
        name, perms = principal
        is_write = req.method in ("POST", "PUT", "DELETE")
        if is_write and perms != "write":
            return _json_resp(403, {"error": "write permission required"})

        try:
            if path == "/admin/servers" and req.method == "GET":
                return self._list_servers()
            if path == "/admin/servers" and req.method == "POST":
                return self._onboard(req)
            if path == "/admin/routes" and req.method == "GET":
                return self._list_routes()
            if path.startswith("/admin/routes/") and path.endswith("/middlewares") and req.method == "PUT":
                route_id = path[len("/admin/routes/") : -len("/middlewares")]
                return self._set_middlewares(route_id, req)
            if path == "/admin/detections" and req.method == "GET":
                return _json_resp(200, [e.to_dict() for e in self.gw.detections.events()])
            if path == "/admin/bans" and req.method == "GET":
                return self._list_bans()
            if path == "/admin/bans" and req.method == "POST":
                return self._create_ban(req)
            if path.startswith("/admin/bans/") and req.method == "DELETE":
                return self._delete_ban(path[len("/admin/bans/") :])
            if path == "/admin/audit/tail" and req.method == "GET":
                return self._audit_tail()
            if path == "/admin/health" and req.method == "GET":
                return self._health()
            if path == "/admin/whoami" and req.method == "GET":
                return _json_resp(200, {"name": name, "permissions": perms})
        except OnboardError as exc:
            return _json_resp(422, {"error": "validation_failed", "diagnostics": exc.diagnostics})
        return _json_resp(404, {"error": "no such endpoint"})

    def _list_servers(self) -> Response:
        snap = self.gw.registry.snapshot()
        return _json_resp(200, [b.to_dict() for b in snap.backends.values()])

    def _onboard(self, req: HttpExchange) -> Response:
        try:
            descriptor = json.loads(req.body.decode("utf-8"))
        except ValueError:
            return _json_resp(400, {"error": "body must be JSON"})
        backend, route = self.gw.registry.onboard_server(descriptor)
        return _json_resp(201, {"backend": backend.to_dict(), "route": self._route_dict(route)})

    @staticmethod
    def _route_dict(route) -> Dict:
        return {
            "id": route.id,
            "host_rule": route.host_rule,
            "path_prefix": route.path_prefix,
            "middleware_ids": list(route.middleware_ids),
            "backend_id": route.backend_id,
        }

    def _list_routes(self) -> Response:
        snap = self.gw.registry.snapshot()
        return _json_resp(
            200,
            {"version": snap.version, "routes": [self._route_dict(r) for r in snap.routes]},
        )

    def _set_middlewares(self, route_id: str, req: HttpExchange) -> Response:
        try:
            payload = json.loads(req.body.decode("utf-8"))
            middleware_ids = [str(m) for m in payload["middleware_ids"]]
        except (ValueError, KeyError, TypeError):
            return _json_resp(400, {"error": "body must be JSON with middleware_ids"})
        expected = payload.get("version")
        if expected is not None and expected != self.gw.registry.snapshot().version:
            return _json_resp(409, {"error": "version_mismatch"})
        route = self.gw.registry.set_route_middlewares(route_id, middleware_ids)
        return _json_resp(200, self._route_dict(route))

    def _list_bans(self) -> Response:
        now = self.gw.clock.monotonic()
        return _json_resp(
            200,
            [
                {
                    "id": e.id,
                    "target": e.target,
                    "reason": e.reason,
                    "source": e.source,
                    "expires_in": max(0.0, e.expires_at - now),
                }
                for e in self.gw.bans.active()
            ],
        )

    def _create_ban(self, req: HttpExchange) -> Response:
        try:
            payload = json.loads(req.body.decode("utf-8"))
            target = str(payload["target"])
        except (ValueError, KeyError):
            return _json_resp(400, {"error": "body must be JSON with target"})
        ttl = float(payload.get("ttl", OPERATOR_BAN_TTL))
        now = self.gw.clock.monotonic()
        entry = self.gw.bans.apply(
            BanEntry(
                target=target,
                reason=str(payload.get("reason", "operator ban")),
                created_at=now,
                expires_at=now + ttl,
                source="operator",
            )
        )
        return _json_resp(201, {"id": entry.id, "target": entry.target})

    def _delete_ban(self, ban_id: str) -> Response:
        if not self.gw.bans.lift(ban_id):
            return _json_resp(404, {"error": "no such ban"})
        self.gw.audit.append("config_change", {"event": "ban_lifted", "ban_id": ban_id})
        return _json_resp(200, {"lifted": ban_id})

    def _health(self) -> Response:
        snap = self.gw.registry.snapshot()
        return _json_resp(
            200,
            {
                "audit_healthy": self.gw.audit.healthy,
                "backends": {b.id: b.health for b in snap.backends.values()},
            },
        )

    # -- audit tail (SSE) --------------------------------------------------

    def _audit_tail(self) -> Response:
        events: "queue.Queue" = queue.Queue(maxsize=1000)
        audit = self.gw.audit

        def on_record(rec):
            try:
                events.put_nowait(rec)
            except queue.Full:
                pass

        def stream() -> Iterator[bytes]:
            audit.subscribe(on_record)
            try:
                for rec in audit.tail(50):
                    yield f"data: {rec.to_json_line()}\n\n".encode()
                while True:
                    try:
                        rec = events.get(timeout=15.0)
                    except queue.Empty:
                        yield b": keepalive\n\n"
                        continue
                    yield f"data: {rec.to_json_line()}\n\n".encode()
            finally:
                audit.unsubscribe(on_record)

        return Response(
            status=200,
            headers=[("Content-Type", "text/event-stream")],
            stream=stream(),
        )

    # -- static UI ---------------------------------------------------------

    def _serve_ui(self, path: str) -> Response:
        if self.ui_dir is None:
            return Response(status=404, body=b"admin UI not built")
        rel = path[len("/admin/ui") :].lstrip("/") or "index.html"
        full = os.path.normpath(os.path.join(self.ui_dir, rel))
        if not full.startswith(os.path.abspath(self.ui_dir)) and not full.startswith(self.ui_dir):
            return Response(status=404, body=b"")
        if not os.path.isfile(full):
            # SPA fallback
            full = os.path.join(self.ui_dir, "index.html")
            if not os.path.isfile(full):
                return Response(status=404, body=b"")
        ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
        with open(full, "rb") as fh:
            return Response(status=200, headers=[("Content-Type", ctype)], body=fh.read())
