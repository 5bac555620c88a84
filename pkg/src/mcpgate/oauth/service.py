"""OAuth 2.1 authorization server + forward-auth endpoint.

Endpoints (on the oauth host):
  GET  /.well-known/oauth-authorization-server
  POST /register                 dynamic client registration (public clients)
  GET  /authorize                authorization-code + PKCE entry
  GET  /idp/login                stub IdP approval page
  GET  /idp/callback             IdP hook return leg
  POST /token                    code exchange (form-encoded)
  GET  /forward-auth             internal, consumed by the proxy layer
"""

from __future__ import annotations

import html
import json
import secrets
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional
from urllib.parse import parse_qs, urlencode, urlparse

from ..clock import SYSTEM_CLOCK, Clock
from ..httpmodel import Decision, HttpExchange, Response, split_host
from .pkce import compute_challenge, is_valid_verifier
from .store import (
    ClientStore,
    GrantStore,
    TokenStore,
    redirect_uri_ok,
)

WELLKNOWN_PATH = "/.well-known/oauth-authorization-server"
REGISTRATION_MAX_BYTES = 16 * 1024
SESSION_TTL = 300.0
DEFAULT_SCOPE = "mcp"


@dataclass
class OAuthConfig:
    issuer: str  # e.g. "https://oauth.example.test"
    users: List[str] = field(default_factory=list)  # stub-IdP auto-approve list
    default_resource_host: str = ""

    @property
    def host(self) -> str:
        return split_host(urlparse(self.issuer).netloc)


@dataclass
class _PendingSession:
    session_id: str
    client_id: str
    redirect_uri: str
    code_challenge: str
    scope: str
    state: str
    resource_host: str
    expires_at: float
    used: bool = False


def _json_response(status: int, payload: Dict, extra_headers=None) -> Response:
    body = json.dumps(payload).encode("utf-8")
    headers = [("Content-Type", "application/json"), ("Cache-Control", "no-store")]
    headers.extend(extra_headers or [])
    return Response(status=status, headers=headers, body=body)


def _oauth_error(status: int, code: str, description: str) -> Response:
    return _json_response(status, {"error": code, "error_description": description})


def _error_page(message: str) -> Response:
    # Rendered error, deliberately without a Location header (no open redirects).
    body = f"<html><body><h1>Authorization error</h1><p>{html.escape(message)}</p></body></html>"
    return Response(status=400, headers=[("Content-Type", "text/html; charset=utf-8")], body=body.encode())


class AuthService:
    """Authorization server state machine plus its HTTP surface."""

    def __init__(
        self,
        config: OAuthConfig,
        clients: ClientStore,
        grants: GrantStore,
        tokens: TokenStore,
        audit=None,
        clock: Clock = SYSTEM_CLOCK,
    ):
        self.config = config
        self.clients = clients
        self.grants = grants
        self.tokens = tokens
        self.audit = audit
        self.clock = clock
        self._sessions: Dict[str, _PendingSession] = {}
        self._lock = threading.Lock()

    # -- metadata ----------------------------------------------------------

    def metadata_document(self) -> Dict[str, object]:
        issuer = self.config.issuer.rstrip("/")
        return {
            "issuer": issuer,
            "authorization_endpoint": issuer + "/authorize",
            "token_endpoint": issuer + "/token",
            "registration_endpoint": issuer + "/register",
            "response_types_supported": ["code"],
            "grant_types_supported": ["authorization_code"],
            "code_challenge_methods_supported": ["S256"],
            "token_endpoint_auth_methods_supported": ["none"],
        }

    # -- forward auth ------------------------------------------------------

    def forward_auth(self, req: HttpExchange, route_host: str) -> Decision:
        token = req.bearer_token()
        if token is not None:
            claims = self.tokens.validate(token, route_host, now=self.clock.monotonic())
            if claims is not None:
                req.attrs["subject"] = claims.subject
                req.attrs["client_id"] = claims.client_id
                return Decision.proceed([("X-Forwarded-User", claims.subject)])
        scheme = req.scheme or "https"
        challenge = (
            f'Bearer resource_metadata="{scheme}://{route_host}{WELLKNOWN_PATH}"'
        )
        return Decision.halt(
            401,
            headers=[("WWW-Authenticate", challenge), ("Content-Type", "application/json")],
            body=json.dumps({"error": "invalid_token", "error_description": "authentication required"}).encode(),
        )

    # -- registration ------------------------------------------------------

    def register_client(self, body: bytes) -> Response:
        if len(body) > REGISTRATION_MAX_BYTES:
            return _oauth_error(400, "invalid_client_metadata", "registration body too large")
        try:
            meta = json.loads(body.decode("utf-8"))
            if not isinstance(meta, dict):
                raise ValueError("not an object")
        except (ValueError, UnicodeDecodeError):
            return _oauth_error(400, "invalid_client_metadata", "body must be a JSON object")

        uris = meta.get("redirect_uris")
        if not isinstance(uris, list) or not uris:
            return _oauth_error(400, "invalid_redirect_uri", "redirect_uris is required and must be non-empty")
        for uri in uris:
            if not isinstance(uri, str) or not redirect_uri_ok(uri):
                return _oauth_error(400, "invalid_redirect_uri", f"unacceptable redirect_uri: {uri!r}")

        name = meta.get("client_name") or "unnamed client"
        reg = self.clients.create(str(name), uris, created_at=self.clock.wall_ms() / 1000.0)
        if self.audit is not None:
            self.audit.append("auth_event", {"event": "client_registered", "client_id": reg.client_id})
        return _json_response(201, reg.to_dict())

    # -- authorization -----------------------------------------------------

    def begin_authorization(self, params: Dict[str, str]) -> Response:
        client_id = params.get("client_id", "")
        redirect_uri = params.get("redirect_uri", "")
        client = self.clients.get(client_id)
        if client is None:
            return _error_page("unknown client_id")
        if redirect_uri not in client.redirect_uris:
            return _error_page("redirect_uri is not registered for this client")

        state = params.get("state", "")

        def bounce(code: str, description: str) -> Response:
            query = {"error": code, "error_description": description}
            if state:
                query["state"] = state
            sep = "&" if "?" in redirect_uri else "?"
            return Response(status=302, headers=[("Location", redirect_uri + sep + urlencode(query))])

        if params.get("response_type") != "code":
            return bounce("unsupported_response_type", "only response_type=code is supported")
        challenge = params.get("code_challenge", "")
        if not challenge:
            return bounce("invalid_request", "code_challenge is required")
        if not (43 <= len(challenge) <= 128):
            return bounce("invalid_request", "code_challenge length out of range")
        if params.get("code_challenge_method") != "S256":
            return bounce("invalid_request", "only code_challenge_method=S256 is supported")

        resource = params.get("resource", "")
        resource_host = split_host(urlparse(resource).netloc or resource) if resource else self.config.default_resource_host
        if not resource_host:
            return bounce("invalid_target", "no resource host requested and no default configured")

        session = _PendingSession(
            session_id=secrets.token_urlsafe(24),
            client_id=client_id,
            redirect_uri=redirect_uri,
            code_challenge=challenge,
            scope=params.get("scope", DEFAULT_SCOPE) or DEFAULT_SCOPE,
            state=state,
            resource_host=resource_host,
            expires_at=self.clock.monotonic() + SESSION_TTL,
        )
        with self._lock:
            self._sessions[session.session_id] = session
        issuer = self.config.issuer.rstrip("/")
        return Response(
            status=302,
            headers=[("Location", f"{issuer}/idp/login?{urlencode({'session': session.session_id})}")],
        )

    def idp_login_page(self, session_id: str) -> Response:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None or session.used or self.clock.monotonic() >= session.expires_at:
            return _error_page("unknown or expired session")
        links = "".join(
            f'<li><a href="/idp/callback?{urlencode({"session": session_id, "subject": user})}">'
            f"Sign in as {html.escape(user)}</a></li>"
            for user in self.config.users
        )
        body = f"<html><body><h1>Stub identity provider</h1><ul>{links}</ul></body></html>"
        return Response(status=200, headers=[("Content-Type", "text/html; charset=utf-8")], body=body.encode())

    def complete_authorization(self, session_id: str, subject: str) -> Response:
        now = self.clock.monotonic()
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None or session.used or now >= session.expires_at:
                return _error_page("unknown or expired session")
            session.used = True  # single-use; replay renders the error page
        if subject not in self.config.users:
            return _error_page("subject is not in the stub IdP user list")
        code = self.grants.mint(
            client_id=session.client_id,
            redirect_uri=session.redirect_uri,
            code_challenge=session.code_challenge,
            scope=session.scope,
            subject=subject,
            resource_host=session.resource_host,
        )
        if self.audit is not None:
            self.audit.append(
                "auth_event",
                {"event": "grant_issued", "client_id": session.client_id, "subject": subject,
                 "resource_host": session.resource_host},
            )
        query = {"code": code}
        if session.state:
            query["state"] = session.state
        sep = "&" if "?" in session.redirect_uri else "?"
        return Response(status=302, headers=[("Location", session.redirect_uri + sep + urlencode(query))])

    # -- token exchange ----------------------------------------------------

    def exchange_token(self, form: Dict[str, str]) -> Response:
        grant_type = form.get("grant_type", "")
        if grant_type != "authorization_code":
            return _oauth_error(400, "unsupported_grant_type", f"unsupported grant_type {grant_type!r}")

        code = form.get("code", "")
        verifier = form.get("code_verifier", "")
        grant, first_use = self.grants.consume(code) if code else (None, False)
        if grant is None:
            return _oauth_error(400, "invalid_grant", "unknown or expired code")

        if not first_use:
            # Code replay: revoke everything previously minted from this grant.
            revoked = self.tokens.revoke_hashes(list(grant.token_hashes))
            if self.audit is not None:
                self.audit.append(
                    "auth_event",
                    {"event": "code_replay_revocation", "client_id": grant.client_id,
                     "revoked_tokens": str(revoked)},
                )
            return _oauth_error(400, "invalid_grant", "code already used")

        if form.get("client_id", "") != grant.client_id:
            return _oauth_error(400, "invalid_grant", "client_id mismatch")
        if form.get("redirect_uri", "") != grant.redirect_uri:
            return _oauth_error(400, "invalid_grant", "redirect_uri mismatch")
        if not is_valid_verifier(verifier) or compute_challenge(verifier) != grant.code_challenge:
            return _oauth_error(400, "invalid_grant", "PKCE verification failed")

        token, rec = self.tokens.issue(
            client_id=grant.client_id,
            subject=grant.subject,
            scope=grant.scope,
            resource_host=grant.resource_host,
        )
        self.grants.attach_token(grant, rec.token_hash)
        if self.audit is not None:
            self.audit.append(
                "auth_event",
                {"event": "token_issued", "client_id": grant.client_id, "subject": grant.subject,
                 "resource_host": grant.resource_host, "scope": grant.scope},
            )
        return _json_response(
            200,
            {
                "access_token": token,
                "token_type": "Bearer",
                "expires_in": int(rec.expires_at - rec.issued_at),
                "scope": rec.scope,
            },
        )

    # -- HTTP dispatch -----------------------------------------------------

    def handle(self, req: HttpExchange) -> Response:
        params = {k: v[0] for k, v in parse_qs(req.query, keep_blank_values=True).items()}
        path = req.path

        if path == WELLKNOWN_PATH and req.method == "GET":
            return _json_response(200, self.metadata_document())
        if path == "/register" and req.method == "POST":
            return self.register_client(req.body)
        if path == "/authorize" and req.method == "GET":
            return self.begin_authorization(params)
        if path == "/idp/login" and req.method == "GET":
            return self.idp_login_page(params.get("session", ""))
        if path == "/idp/callback" and req.method == "GET":
            return self.complete_authorization(params.get("session", ""), params.get("subject", ""))
        if path == "/token" and req.method == "POST":
            form = {k: v[0] for k, v in parse_qs(req.body.decode("utf-8", "replace"), keep_blank_values=True).items()}
            return self.exchange_token(form)
        if path == "/forward-auth" and req.method == "GET":
            host = split_host(req.headers.get("X-Forwarded-Host") or req.host)
            decision = self.forward_auth(req, host)
            if decision.short_circuit:
                return Response(status=decision.status, headers=decision.headers, body=decision.body)
            return Response(status=200, headers=decision.mutations, body=b"")
        return _json_response(404, {"error": "invalid_request", "error_description": "no such endpoint"})
