"""Gateway assembly: wires config, stores, middlewares, listeners and the
proxy into one runnable unit."""

from __future__ import annotations

import json
import os
import threading
from typing import Dict, List, Optional

from .audit import AuditLog
from .clock import SYSTEM_CLOCK, Clock
from .config import GatewayConfig, MiddlewareSpec
from .httpmodel import Decision, HttpExchange, Response
from .httpserver import Listener
from .inspection.rules import DetectionLog, compile_rules
from .middlewares import (
    InspectMiddleware,
    ban_check_middleware,
    forward_auth_middleware,
    inspect_middleware,
    rate_limit_middleware,
    redirect_wellknown_middleware,
)
from .oauth.service import AuthService
from .oauth.store import ClientStore, GrantStore, TokenStore
from .policy import BanStore, RateLimiter, StreamLimiter
from .proxy import DirectHttpConnector, UpstreamUnreachable, proxy_request
from .registry import Registry, default_prober
from .routing import NamedMiddleware, route_request, run_chain


class Gateway:
    def __init__(self, config: GatewayConfig, clock: Clock = SYSTEM_CLOCK):
        self.config = config
        self.clock = clock

        state = config.state_dir
        if state:
            os.makedirs(state, exist_ok=True)

        def spath(name: str) -> Optional[str]:
            return os.path.join(state, name) if state else None

        self.audit = AuditLog(spath("audit.log"), clock=clock)
        self.bans = BanStore(spath("bans.json"), clock=clock, audit=self.audit)
        self.detections = DetectionLog()
        self.limiter = RateLimiter(clock=clock)
        self.stream_limiter = StreamLimiter()
        self.connector = DirectHttpConnector()

        self.clients = ClientStore(spath("clients.json"))
        self.grants = GrantStore(clock=clock)
        self.tokens = TokenStore(spath("tokens.json"), clock=clock)
        self.auth = AuthService(config.oauth, self.clients, self.grants, self.tokens, audit=self.audit, clock=clock)

        self.registry = Registry(config, audit=self.audit, clock=clock)

        self._middlewares: Dict[str, NamedMiddleware] = {}
        self._inspectors: Dict[str, InspectMiddleware] = {}
        for name, spec in config.middlewares.items():
            self._middlewares[name] = self._build_middleware(name, spec)

        self._listeners: List[Listener] = []
        self._admin_listener: Optional[Listener] = None

    def _build_middleware(self, name: str, spec: MiddlewareSpec) -> NamedMiddleware:
        if spec.type == "forward_auth":
            return forward_auth_middleware(name, self.auth)
        if spec.type == "redirect_wellknown":
            return redirect_wellknown_middleware(name, self.config.oauth.host)
        if spec.type == "rate_limit":
            return rate_limit_middleware(name, spec.rate_limit, self.limiter)
        if spec.type == "ban_check":
            return ban_check_middleware(name, self.bans)
        if spec.type == "inspect":
            rules = [r for r in self.config.rules if r.id in set(spec.rule_ids)]
            inspector = InspectMiddleware(
                name,
                compile_rules(rules),
                self.bans,
                self.detections,
                audit=self.audit,
                clock=self.clock,
                inspect_responses=spec.inspect_responses,
            )
            self._inspectors[name] = inspector
            return inspect_middleware(inspector)
        raise ValueError(f"unknown middleware type {spec.type!r}")

    # -- request handling --------------------------------------------------

    def handle_public(self, req: HttpExchange) -> Response:
        if req.host == self.config.oauth.host:
            resp = self.auth.handle(req)
            self._audit_exchange(req, resp.status, route_id="oauth")
            return resp

        snap = self.registry.snapshot()
        route = route_request(req, snap.routes)
        if route is None:
            self._audit_exchange(req, 404, route_id="")
            return Response(status=404, body=b"no route")

        chain = [self._middlewares[m] for m in route.middleware_ids if m in self._middlewares]

        def on_error(mw_id: str, exc: Exception) -> None:
            self.audit.append(
                "exchange",
                {"route_id": route.id, "method": req.method, "path": req.path,
                 "outcome": "error", "middleware": mw_id, "error": type(exc).__name__},
            )

        decision = run_chain(req, route, chain, on_error=on_error)
        if decision.short_circuit:
            if decision.status != 500:  # 500s were already audited as errors
                self._audit_exchange(req, decision.status, route_id=route.id)
            return Response(status=decision.status, headers=decision.headers, body=decision.body)

        backend = snap.backends.get(route.backend_id)
        if backend is None:
            self._audit_exchange(req, 502, route_id=route.id, outcome="missing_backend")
            return Response(status=502, body=b"backend not registered")

        peer = req.peer_ip
        if not self.stream_limiter.acquire(peer):
            self._audit_exchange(req, 429, route_id=route.id, outcome="connection_limit")
            return Response(status=429, body=b"too many concurrent streams")

        released = threading.Event()

        def release_once():
            if not released.is_set():
                released.set()
                self.stream_limiter.release(peer)

        try:
            resp = proxy_request(
                req,
                backend.upstream_url,
                decision.mutations,
                connector=self.connector,
                on_stream_close=release_once,
            )
        except UpstreamUnreachable:
            release_once()
            self._audit_exchange(req, 502, route_id=route.id, outcome="upstream_unreachable")
            return Response(status=502, body=b"upstream unreachable")
        except Exception:
            release_once()
            raise

        # Response-side tool-list inspection, when the route opts in.
        if resp.stream is None:
            for mw_id in route.middleware_ids:
                inspector = self._inspectors.get(mw_id)
                if inspector is not None and inspector.inspect_responses:
                    halted = inspector.scan_response_tools(resp.body, req)
                    if halted is not None:
                        self._audit_exchange(req, halted.status, route_id=route.id, outcome="response_blocked")
                        return Response(status=halted.status, headers=halted.headers, body=halted.body)

        self._audit_exchange(req, resp.status, route_id=route.id, subject=req.attrs.get("subject", ""))
        return resp

    def _audit_exchange(self, req: HttpExchange, status: int, route_id: str, outcome: str = "", subject: str = "") -> None:
        summary = {
            "route_id": route_id,
            "method": req.method,
            "host": req.host,
            "path": req.path,
            "status": str(status),
            "peer_ip": req.peer_ip,
        }
        if outcome:
            summary["outcome"] = outcome
        if subject:
            summary["subject"] = subject
        self.audit.append("exchange", summary)

    # -- lifecycle ---------------------------------------------------------

    def start(self, health_prober=default_prober, health_interval: Optional[float] = None) -> None:
        for spec in self.config.entry_points.values():
            listener = Listener(
                self.handle_public,
                host=spec.host,
                port=spec.port,
                tls_cert=spec.tls_cert,
                tls_key=spec.tls_key,
                clock=self.clock,
            )
            listener.start()
            self._listeners.append(listener)
        if self.config.admin is not None:
            from .admin import AdminApi

            admin_api = AdminApi(self)
            spec = self.config.admin
            host, port = spec.address.rsplit(":", 1)
            self._admin_listener = Listener(admin_api.handle, host=host, port=int(port), clock=self.clock)
            self._admin_listener.start()
        if health_prober is not None:
            self.registry.start_health_checks(health_prober, interval=health_interval)

    def stop(self) -> None:
        self.registry.stop()
        for listener in self._listeners:
            listener.stop()
        if self._admin_listener is not None:
            self._admin_listener.stop()
        self._listeners = []
        self._admin_listener = None

    @property
    def public_port(self) -> int:
        return self._listeners[0].port if self._listeners else 0

    @property
    def admin_port(self) -> int:
        return self._admin_listener.port if self._admin_listener else 0
