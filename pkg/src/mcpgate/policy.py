"""Per-route traffic policy: token-bucket rate limiting and behavioural bans.

Bans survive restart (persisted next to the rest of the gateway state); a ban
is meaningless if bouncing the process clears it.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .clock import SYSTEM_CLOCK, Clock

DETECTION_BAN_TTL = 600.0  # seconds, default for rule-triggered bans
OPERATOR_BAN_TTL = 24 * 3600.0
DEFAULT_MAX_SSE_STREAMS = 16  # concurrent streams per peer


@dataclass(frozen=True)
class RateLimitSpec:
    rate: float  # tokens per second
    burst: int  # max bucket depth
    key_by: str = "peer_ip"  # peer_ip | client_id | subject

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if self.burst < 1:
            raise ValueError("burst must be >= 1")
        if self.key_by not in ("peer_ip", "client_id", "subject"):
            raise ValueError(f"unknown key_by: {self.key_by}")


@dataclass(frozen=True)
class Allow:
    pass


@dataclass(frozen=True)
class Deny:
    retry_after: float  # seconds until one token accrues


class RateLimiter:
    """Continuous-refill token bucket per key.

    Bucket starts full; each allowed request consumes one token; tokens refill
    at `rate` per second up to `burst`. Deny carries the exact time until one
    full token is available, so Retry-After is deterministic.
    """

    def __init__(self, clock: Clock = SYSTEM_CLOCK):
        self._clock = clock
        self._lock = threading.Lock()
        # key -> (tokens, last_refill)
        self._buckets: Dict[str, List[float]] = {}

    def check(self, key: str, spec: RateLimitSpec):
        now = self._clock.monotonic()
        with self._lock:
            bucket = self._buckets.get(key)
            if bucket is None:
                bucket = [float(spec.burst), now]
                self._buckets[key] = bucket
            tokens, last = bucket
            tokens = min(float(spec.burst), tokens + (now - last) * spec.rate)
            if tokens >= 1.0:
                bucket[0] = tokens - 1.0
                bucket[1] = now
                return Allow()
            bucket[0] = tokens
            bucket[1] = now
            return Deny(retry_after=(1.0 - tokens) / spec.rate)


@dataclass
class BanEntry:
    target: str  # peer IP or client_id
    reason: str
    created_at: float  # monotonic clock seconds
    expires_at: float
    source: str = "detection"  # detection | operator
    id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])

    def __post_init__(self):
        if self.expires_at <= self.created_at:
            raise ValueError("expires_at must be after created_at")
        if self.source not in ("detection", "operator"):
            raise ValueError(f"unknown ban source: {self.source}")


@dataclass(frozen=True)
class Clear:
    pass


@dataclass(frozen=True)
class Banned:
    entry: BanEntry


class BanStore:
    """Active bans keyed by target; re-banning an active target only ever
    extends the expiry (idempotent escalation, max-of rule)."""

    def __init__(self, path: Optional[str] = None, clock: Clock = SYSTEM_CLOCK, audit=None):
        self._path = path
        self._clock = clock
        self._audit = audit
        self._lock = threading.Lock()
        self._by_target: Dict[str, BanEntry] = {}
        if path and os.path.exists(path):
            self._load()

    def _load(self) -> None:
        with open(self._path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        # Expiries persist as absolute wall-clock instants, then map back onto
        # the monotonic axis, so bans keep expiring on schedule across restarts.
        now = self._clock.monotonic()
        now_wall = self._clock.wall_ms()
        for obj in raw:
            remaining = (obj["expires_wall_ms"] - now_wall) / 1000.0
            if remaining <= 0:
                continue
            entry = BanEntry(
                target=obj["target"],
                reason=obj["reason"],
                created_at=now,
                expires_at=now + remaining,
                source=obj["source"],
                id=obj["id"],
            )
            self._by_target[entry.target] = entry

    def _save_locked(self) -> None:
        if not self._path:
            return
        now = self._clock.monotonic()
        now_wall = self._clock.wall_ms()
        raw = [
            {
                "id": e.id,
                "target": e.target,
                "reason": e.reason,
                "source": e.source,
                "expires_wall_ms": now_wall + int((e.expires_at - now) * 1000),
            }
            for e in self._by_target.values()
            if e.expires_at > now
        ]
        tmp = self._path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(raw, fh)
        os.replace(tmp, self._path)

    def apply(self, entry: BanEntry) -> BanEntry:
        with self._lock:
            existing = self._by_target.get(entry.target)
            now = self._clock.monotonic()
            if existing is not None and existing.expires_at > now:
                existing.expires_at = max(existing.expires_at, entry.expires_at)
                stored = existing
            else:
                self._by_target[entry.target] = entry
                stored = entry
            self._save_locked()
        if self._audit is not None:
            self._audit.append(
                "ban_applied",
                {
                    "target": stored.target,
                    "reason": stored.reason,
                    "source": stored.source,
                    "ban_id": stored.id,
                },
            )
        return stored

    def check(self, targets: List[str]):
        """Banned iff any unexpired entry matches one of the given targets
        (peer IP, and client_id when known)."""
        now = self._clock.monotonic()
        with self._lock:
            for target in targets:
                if not target:
                    continue
                entry = self._by_target.get(target)
                if entry is not None and entry.expires_at > now:
                    return Banned(entry)
        return Clear()

    def lift(self, ban_id: str) -> bool:
        with self._lock:
            for target, entry in list(self._by_target.items()):
                if entry.id == ban_id:
                    del self._by_target[target]
                    self._save_locked()
                    return True
        return False

    def active(self) -> List[BanEntry]:
        now = self._clock.monotonic()
        with self._lock:
            return [e for e in self._by_target.values() if e.expires_at > now]


class StreamLimiter:
    """Connection limits: caps concurrent SSE streams per peer."""

    def __init__(self, max_per_peer: int = DEFAULT_MAX_SSE_STREAMS):
        self.max_per_peer = max_per_peer
        self._lock = threading.Lock()
        self._counts: Dict[str, int] = {}

    def acquire(self, peer: str) -> bool:
        with self._lock:
            if self._counts.get(peer, 0) >= self.max_per_peer:
                return False
            self._counts[peer] = self._counts.get(peer, 0) + 1
            return True

    def release(self, peer: str) -> None:
        with self._lock:
            count = self._counts.get(peer, 0)
            if count <= 1:
                self._counts.pop(peer, None)
            else:
                self._counts[peer] = count - 1
