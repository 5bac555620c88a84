"""OAuth state: registered clients, pending PKCE-bound grants, issued tokens.

Secret values (authorization codes, access tokens) are never persisted in
plaintext; stores keep a salted hash and look records up by re-hashing the
presented value. Plaintext exists only in the HTTP responses that hand the
value to its owner.
"""

from __future__ import annotations

import hashlib
import json
import os
import secrets
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional
from urllib.parse import urlparse

from ..clock import SYSTEM_CLOCK, Clock

CODE_TTL = 120.0  # seconds
TOKEN_TTL = 3600.0
CONSUMED_RETENTION = CODE_TTL  # consumed codes tracked until natural expiry

_LOOPBACK_HOSTS = ("localhost", "127.0.0.1", "::1", "[::1]")


def redirect_uri_ok(uri: str) -> bool:
    """Absolute, no fragment, https or loopback http."""
    try:
        parsed = urlparse(uri)
    except ValueError:
        return False
    if not parsed.scheme or not parsed.netloc or parsed.fragment:
        return False
    if parsed.scheme == "https":
        return True
    if parsed.scheme == "http" and parsed.hostname in _LOOPBACK_HOSTS:
        return True
    return False


def _hash(salt: str, value: str) -> str:
    return hashlib.sha256((salt + value).encode("utf-8")).hexdigest()


@dataclass
class ClientRegistration:
    client_id: str
    client_name: str
    redirect_uris: List[str]
    token_endpoint_auth_method: str = "none"
    created_at: float = 0.0  # wall clock seconds

    def to_dict(self) -> Dict:
        return {
            "client_id": self.client_id,
            "client_name": self.client_name,
            "redirect_uris": list(self.redirect_uris),
            "token_endpoint_auth_method": self.token_endpoint_auth_method,
        }


class ClientStore:
    def __init__(self, path: Optional[str] = None):
        self._path = path
        self._lock = threading.Lock()
        self._clients: Dict[str, ClientRegistration] = {}
        if path and os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                for obj in json.load(fh):
                    reg = ClientRegistration(**obj)
                    self._clients[reg.client_id] = reg

    def create(self, client_name: str, redirect_uris: List[str], created_at: float) -> ClientRegistration:
        # 128 bits of entropy, URL-safe
        client_id = secrets.token_urlsafe(16)
        reg = ClientRegistration(
            client_id=client_id,
            client_name=client_name,
            redirect_uris=list(redirect_uris),
            created_at=created_at,
        )
        with self._lock:
            self._clients[client_id] = reg
            self._save_locked()
        return reg

    def get(self, client_id: str) -> Optional[ClientRegistration]:
        with self._lock:
            return self._clients.get(client_id)

    def _save_locked(self) -> None:
        if not self._path:
            return
        raw = [
            {
                "client_id": c.client_id,
                "client_name": c.client_name,
                "redirect_uris": c.redirect_uris,
                "token_endpoint_auth_method": c.token_endpoint_auth_method,
                "created_at": c.created_at,
            }
            for c in self._clients.values()
        ]
        tmp = self._path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(raw, fh)
        os.replace(tmp, self._path)


@dataclass
class AuthorizationGrant:
    code_hash: str
    client_id: str
    redirect_uri: str
    code_challenge: str
    code_challenge_method: str
    scope: str
    subject: str
    resource_host: str
    issued_at: float  # monotonic seconds
    expires_at: float
    consumed: bool = False
    token_hashes: List[str] = field(default_factory=list)  # tokens minted from this grant


class GrantStore:
    """In-memory; codes are short-lived (120 s) so they never hit disk."""

    def __init__(self, clock: Clock = SYSTEM_CLOCK):
        self._clock = clock
        self._lock = threading.Lock()
        self._salt = secrets.token_hex(16)
        self._grants: Dict[str, AuthorizationGrant] = {}

    def mint(
        self,
        client_id: str,
        redirect_uri: str,
        code_challenge: str,
        scope: str,
        subject: str,
        resource_host: str,
    ) -> str:
        """Create a grant and return the plaintext code (only copy there is)."""
        code = secrets.token_urlsafe(32)
        now = self._clock.monotonic()
        grant = AuthorizationGrant(
            code_hash=_hash(self._salt, code),
            client_id=client_id,
            redirect_uri=redirect_uri,
            code_challenge=code_challenge,
            code_challenge_method="S256",
            scope=scope,
            subject=subject,
            resource_host=resource_host,
            issued_at=now,
            expires_at=now + CODE_TTL,
        )
        with self._lock:
            self._grants[grant.code_hash] = grant
        return code

    def consume(self, code: str):
        """Atomically mark the grant consumed. Returns (grant, first_use);
        (None, False) when the code is unknown or expired. Only one caller
        ever observes first_use=True for a given code (compare-and-set under
        the store lock), which is what makes replay detection reliable."""
        code_hash = _hash(self._salt, code)
        now = self._clock.monotonic()
        with self._lock:
            grant = self._grants.get(code_hash)
            if grant is None or now >= grant.expires_at:
                return None, False
            if grant.consumed:
                return grant, False
            grant.consumed = True
            return grant, True

    def peek(self, code: str) -> Optional[AuthorizationGrant]:
        with self._lock:
            return self._grants.get(_hash(self._salt, code))

    def attach_token(self, grant: AuthorizationGrant, token_hash: str) -> None:
        with self._lock:
            grant.token_hashes.append(token_hash)


@dataclass
class TokenRecord:
    token_hash: str
    client_id: str
    subject: str
    scope: str
    resource_host: str
    issued_at: float  # monotonic seconds
    expires_at: float
    revoked: bool = False


@dataclass(frozen=True)
class Claims:
    subject: str
    scope: str
    client_id: str


class TokenStore:
    def __init__(self, path: Optional[str] = None, clock: Clock = SYSTEM_CLOCK):
        self._clock = clock
        self._path = path
        self._lock = threading.Lock()
        self._tokens: Dict[str, TokenRecord] = {}
        self._salt = secrets.token_hex(16)
        if path and os.path.exists(path):
            self._load()

    def _load(self) -> None:
        with open(self._path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        self._salt = raw["salt"]
        now = self._clock.monotonic()
        for obj in raw["tokens"]:
            remaining = obj.pop("remaining")
            if remaining <= 0:
                continue
            rec = TokenRecord(issued_at=now, expires_at=now + remaining, **obj)
            self._tokens[rec.token_hash] = rec

    def _save_locked(self) -> None:
        if not self._path:
            return
        now = self._clock.monotonic()
        raw = {
            "salt": self._salt,
            "tokens": [
                {
                    "token_hash": t.token_hash,
                    "client_id": t.client_id,
                    "subject": t.subject,
                    "scope": t.scope,
                    "resource_host": t.resource_host,
                    "revoked": t.revoked,
                    "remaining": t.expires_at - now,
                }
                for t in self._tokens.values()
                if t.expires_at > now
            ],
        }
        tmp = self._path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(raw, fh)
        os.replace(tmp, self._path)

    def issue(self, client_id: str, subject: str, scope: str, resource_host: str) -> tuple:
        """Returns (plaintext token, record). 256 bits of entropy."""
        token = secrets.token_urlsafe(32)
        now = self._clock.monotonic()
        rec = TokenRecord(
            token_hash=_hash(self._salt, token),
            client_id=client_id,
            subject=subject,
            scope=scope,
            resource_host=resource_host,
            issued_at=now,
            expires_at=now + TOKEN_TTL,
        )
        with self._lock:
            self._tokens[rec.token_hash] = rec
            self._save_locked()
        return token, rec

    def validate(self, token: str, resource_host: str, now: Optional[float] = None) -> Optional[Claims]:
        """Claims iff the token exists, now < expires_at (exclusive boundary),
        not revoked, and the audience host matches."""
        if now is None:
            now = self._clock.monotonic()
        with self._lock:
            rec = self._tokens.get(_hash(self._salt, token))
            if rec is None or rec.revoked or now >= rec.expires_at:
                return None
            if rec.resource_host != resource_host:
                return None
            return Claims(subject=rec.subject, scope=rec.scope, client_id=rec.client_id)

    def revoke_hashes(self, token_hashes: List[str]) -> int:
        revoked = 0
        with self._lock:
            for token_hash in token_hashes:
                rec = self._tokens.get(token_hash)
                if rec is not None and not rec.revoked:
                    rec.revoked = True
                    revoked += 1
            if revoked:
                self._save_locked()
        return revoked
