"""Deterministic scripted MCP client driving the full discovery/auth flow:

  1. unauthenticated request        -> 401 + WWW-Authenticate
  2. metadata discovery             -> follow one 308 to the oauth host
  3. dynamic client registration
  4. authorize with a fresh PKCE pair
  5. stub IdP login
  6. token exchange
  7. retried request with Bearer    -> success

Every step's outcome is recorded in a transcript; the first deviation marks
the transcript failed at that step. All test hosts resolve to the loopback
gateway listener via a HostMap (no DNS, no network egress)."""

from __future__ import annotations

import json
import re
import secrets
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
from urllib.parse import parse_qs, urlencode, urlsplit

import requests

from ..oauth.pkce import compute_challenge

_RESOURCE_METADATA_RE = re.compile(r'resource_metadata="([^"]+)"')


@dataclass
class HostMap:
    """Resolves virtual hosts (helloworld.example.test, oauth.example.test)
    to the single loopback listener."""

    port: int
    address: str = "127.0.0.1"

    def url_for(self, host: str, path: str, query: str = "") -> str:
        url = f"http://{self.address}:{self.port}{path}"
        return url + (f"?{query}" if query else "")


@dataclass
class StepResult:
    name: str
    ok: bool
    detail: str = ""
    status: int = 0


@dataclass
class Transcript:
    steps: List[StepResult] = field(default_factory=list)
    access_token: str = ""
    codes_seen: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(s.ok for s in self.steps)

    def failed_step(self) -> Optional[StepResult]:
        for step in self.steps:
            if not step.ok:
                return step
        return None


class ScriptedClient:
    def __init__(self, hosts: HostMap, route_host: str, subject: str = "alice"):
        self.hosts = hosts
        self.route_host = route_host
        self.subject = subject
        self.session = requests.Session()
        # Loopback redirect target: acceptable for public clients.
        self.redirect_uri = "http://127.0.0.1:19876/cb"

    def _request(self, method: str, host: str, path: str, query: str = "", **kwargs) -> requests.Response:
        headers = kwargs.pop("headers", {})
        headers["Host"] = host
        return self.session.request(
            method,
            self.hosts.url_for(host, path, query),
            headers=headers,
            allow_redirects=False,
            timeout=10,
            **kwargs,
        )

    def _request_url(self, method: str, url: str, **kwargs) -> requests.Response:
        split = urlsplit(url)
        return self._request(method, split.netloc, split.path, split.query, **kwargs)

    def run(self, wrong_verifier: bool = False) -> Transcript:
        t = Transcript()

        # 1: unauthenticated request must bounce with discovery hints
        resp = self._request("GET", self.route_host, "/sse")
        challenge = resp.headers.get("WWW-Authenticate", "")
        match = _RESOURCE_METADATA_RE.search(challenge)
        ok = resp.status_code == 401 and match is not None
        t.steps.append(StepResult("unauthenticated_request", ok, f"status={resp.status_code}", resp.status_code))
        if not ok:
            return t
        resp.close()
        metadata_url = match.group(1)

        # 2: metadata discovery, following exactly one 308 to the oauth host
        resp = self._request_url("GET", metadata_url)
        if resp.status_code == 308:
            resp = self._request_url("GET", resp.headers["Location"])
        metadata = {}
        ok = resp.status_code == 200
        if ok:
            metadata = resp.json()
            ok = metadata.get("code_challenge_methods_supported") == ["S256"] and "token_endpoint" in metadata
        t.steps.append(StepResult("metadata_discovery", ok, f"status={resp.status_code}", resp.status_code))
        if not ok:
            return t

        # 3: dynamic client registration
        resp = self._request_url(
            "POST",
            metadata["registration_endpoint"],
            json={"client_name": "scripted-client", "redirect_uris": [self.redirect_uri]},
        )
        ok = resp.status_code == 201 and "client_id" in resp.json()
        t.steps.append(StepResult("dynamic_registration", ok, f"status={resp.status_code}", resp.status_code))
        if not ok:
            return t
        client_id = resp.json()["client_id"]

        # 4: authorization request with a fresh PKCE pair
        verifier = secrets.token_urlsafe(48)[:64]
        state = secrets.token_urlsafe(12)
        query = urlencode(
            {
                "response_type": "code",
                "client_id": client_id,
                "redirect_uri": self.redirect_uri,
                "code_challenge": compute_challenge(verifier),
                "code_challenge_method": "S256",
                "state": state,
                "scope": "mcp",
                "resource": f"https://{self.route_host}",
            }
        )
        auth_url = metadata["authorization_endpoint"]
        split = urlsplit(auth_url)
        resp = self._request("GET", split.netloc, split.path, query)
        location = resp.headers.get("Location", "")
        ok = resp.status_code == 302 and "/idp/login" in location
        t.steps.append(StepResult("authorize", ok, f"status={resp.status_code}", resp.status_code))
        if not ok:
            return t
        session_id = parse_qs(urlsplit(location).query).get("session", [""])[0]

        # 5: stub IdP login (auto-approve as the configured subject)
        resp = self._request(
            "GET",
            urlsplit(metadata["issuer"]).netloc,
            "/idp/callback",
            urlencode({"session": session_id, "subject": self.subject}),
        )
        location = resp.headers.get("Location", "")
        cb_query = parse_qs(urlsplit(location).query)
        code = cb_query.get("code", [""])[0]
        ok = (
            resp.status_code == 302
            and location.startswith(self.redirect_uri)
            and bool(code)
            and cb_query.get("state", [""])[0] == state
        )
        t.steps.append(StepResult("idp_login", ok, f"status={resp.status_code}", resp.status_code))
        if not ok:
            return t
        t.codes_seen.append(code)

        # 6: token exchange
        resp = self._request_url(
            "POST",
            metadata["token_endpoint"],
            data={
                "grant_type": "authorization_code",
                "code": code,
                "redirect_uri": self.redirect_uri,
                "client_id": client_id,
                "code_verifier": secrets.token_urlsafe(48)[:64] if wrong_verifier else verifier,
            },
        )
        body = resp.json()
        if wrong_verifier:
            ok = resp.status_code == 400 and body.get("error") == "invalid_grant"
            t.steps.append(StepResult("token_exchange", ok, f"error={body.get('error')}", resp.status_code))
            return t
        ok = resp.status_code == 200 and "access_token" in body and body.get("token_type") == "Bearer"
        t.steps.append(StepResult("token_exchange", ok, f"status={resp.status_code}", resp.status_code))
        if not ok:
            return t
        t.access_token = body["access_token"]

        # 7: retried request with the Bearer token
        resp = self._request(
            "GET",
            self.route_host,
            "/sse",
            headers={"Authorization": f"Bearer {t.access_token}"},
            stream=True,
        )
        ok = resp.status_code == 200 and resp.headers.get("Content-Type", "").startswith("text/event-stream")
        t.steps.append(StepResult("authenticated_retry", ok, f"status={resp.status_code}", resp.status_code))
        resp.close()
        return t
