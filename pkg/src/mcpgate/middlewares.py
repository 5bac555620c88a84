"""The gateway's built-in middleware kinds, built from config specs:

  forward_auth        delegate the auth decision to the auth service
  redirect_wellknown  bounce OAuth metadata discovery to the oauth host
  rate_limit          per-key token bucket, 429 + Retry-After on deny
  ban_check           403 for peers/clients with an active behavioural ban
  inspect             strict MCP protocol validation + rule engine
"""

from __future__ import annotations

import json
from typing import List, Optional

from .clock import SYSTEM_CLOCK
from .httpmodel import Decision, HttpExchange
from .inspection.protocol import CLIENT_TO_SERVER, validate_mcp_message
from .inspection.poisoning import scan_tool_descriptions
from .inspection.rules import DetectionLog, InspectionContext, RuleSet, Verdict, evaluate_rules
from .oauth.service import WELLKNOWN_PATH, AuthService
from .policy import Allow, BanEntry, BanStore, Banned, RateLimiter, RateLimitSpec
from .routing import NamedMiddleware, RouteConfig


def forward_auth_middleware(mw_id: str, auth: AuthService) -> NamedMiddleware:
    def fn(req: HttpExchange, route: RouteConfig) -> Decision:
        return auth.forward_auth(req, route.host_rule)

    return NamedMiddleware(id=mw_id, fn=fn)


def redirect_wellknown_middleware(mw_id: str, oauth_host: str) -> NamedMiddleware:
    def fn(req: HttpExchange, route: RouteConfig) -> Decision:
        if req.path == WELLKNOWN_PATH and req.host != oauth_host:
            location = f"{req.scheme}://{oauth_host}{WELLKNOWN_PATH}"
            return Decision.halt(308, headers=[("Location", location)])
        return Decision.proceed()

    return NamedMiddleware(id=mw_id, fn=fn)


def rate_limit_middleware(mw_id: str, spec: RateLimitSpec, limiter: RateLimiter) -> NamedMiddleware:
    def fn(req: HttpExchange, route: RouteConfig) -> Decision:
        if spec.key_by == "peer_ip":
            key = req.peer_ip
        elif spec.key_by == "client_id":
            key = req.attrs.get("client_id", req.peer_ip)
        else:
            key = req.attrs.get("subject", req.peer_ip)
        outcome = limiter.check(f"{mw_id}:{route.id}:{key}", spec)
        if isinstance(outcome, Allow):
            return Decision.proceed()
        return Decision.halt(
            429,
            headers=[("Retry-After", f"{outcome.retry_after:.3f}"), ("Content-Type", "application/json")],
            body=json.dumps({"error": "rate_limited", "retry_after": outcome.retry_after}).encode(),
        )

    return NamedMiddleware(id=mw_id, fn=fn)


def ban_check_middleware(mw_id: str, bans: BanStore) -> NamedMiddleware:
    def fn(req: HttpExchange, route: RouteConfig) -> Decision:
        targets = [req.peer_ip, req.attrs.get("client_id", "")]
        outcome = bans.check(targets)
        if isinstance(outcome, Banned):
            return Decision.halt(
                403,
                headers=[("Content-Type", "application/json")],
                body=json.dumps({"error": "banned", "reason": outcome.entry.reason}).encode(),
            )
        return Decision.proceed()

    return NamedMiddleware(id=mw_id, fn=fn)


class InspectMiddleware:
    """Request-side MCP inspection; response-side tool-list scanning is driven
    by the proxy via scan_response_tools when enabled for the route."""

    def __init__(
        self,
        mw_id: str,
        ruleset: RuleSet,
        bans: BanStore,
        detections: DetectionLog,
        audit=None,
        clock=None,
        inspect_responses: bool = False,
    ):
        self.id = mw_id
        self.ruleset = ruleset
        self.bans = bans
        self.detections = detections
        self.audit = audit
        self.clock = clock if clock is not None else SYSTEM_CLOCK
        self.inspect_responses = inspect_responses

    def _apply_verdict(self, verdict: Verdict, req: HttpExchange) -> Decision:
        for event in verdict.events:
            self.detections.add(event)
            if self.audit is not None:
                self.audit.append(
                    "detection",
                    {
                        "rule_id": event.rule_id,
                        "severity": event.severity,
                        "action": event.action_taken,
                        "peer_ip": event.peer_ip,
                    },
                )
        if verdict.action == "ban":
            now = self.clock.monotonic()
            self.bans.apply(
                BanEntry(
                    target=req.peer_ip,
                    reason=verdict.ban_reason,
                    created_at=now,
                    expires_at=now + verdict.ban_ttl,
                    source="detection",
                )
            )
        if verdict.status:
            return Decision.halt(
                verdict.status,
                headers=[("Content-Type", "application/json")],
                body=json.dumps({"error": "request_blocked"}).encode(),
            )
        return Decision.proceed()

    def __call__(self, req: HttpExchange, route: RouteConfig) -> Decision:
        violations = []
        body_text = ""
        if req.method in ("POST", "PUT") and req.body:
            result = validate_mcp_message(req.body, CLIENT_TO_SERVER)
            if isinstance(result, list):
                violations = result
            body_text = req.body.decode("utf-8", "replace")
        context = InspectionContext(
            peer_ip=req.peer_ip,
            client_id=req.attrs.get("client_id", ""),
            body_text=body_text,
            traffic_line=f"{req.method} {req.host}{req.path}",
            violations=violations,
            findings=[],
        )
        verdict = evaluate_rules(context, self.ruleset, clock=self.clock)
        return self._apply_verdict(verdict, req)

    def scan_response_tools(self, body: bytes, req: HttpExchange) -> Optional[Decision]:
        """Scan a server->client tools/list response body; returns a halting
        Decision when a deny/ban rule matches, else None."""
        try:
            parsed = json.loads(body.decode("utf-8"))
            tools = parsed.get("result", {}).get("tools", [])
        except (ValueError, AttributeError, UnicodeDecodeError):
            return None
        if not isinstance(tools, list) or not tools:
            return None
        findings = scan_tool_descriptions([t for t in tools if isinstance(t, dict)])
        if not findings:
            return None
        context = InspectionContext(
            peer_ip=req.peer_ip,
            client_id=req.attrs.get("client_id", ""),
            traffic_line=f"{req.method} {req.host}{req.path}",
            findings=findings,
        )
        verdict = evaluate_rules(context, self.ruleset, clock=self.clock)
        decision = self._apply_verdict(verdict, req)
        return decision if decision.short_circuit else None


def inspect_middleware(mw: InspectMiddleware) -> NamedMiddleware:
    return NamedMiddleware(id=mw.id, fn=mw)
