"""Tamper-evident audit trail: hash-chained, append-only, one JSON object per line.

Each record's hash covers the previous record's hash, so any retroactive edit,
deletion or reorder breaks verification at the first affected sequence number.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Union

from .clock import SYSTEM_CLOCK, Clock
from .redact import redact_text

GENESIS_PREV = b"\x00" * 32

KINDS = {"exchange", "auth_event", "detection", "ban_applied", "config_change"}


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    observed_at: int  # UTC wall clock, milliseconds
    kind: str
    summary: Dict[str, str]
    prev_hash: bytes
    hash: bytes

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "observed_at": self.observed_at,
                "kind": self.kind,
                "summary": self.summary,
                "prev_hash": self.prev_hash.hex(),
                "hash": self.hash.hex(),
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @staticmethod
    def from_json_line(line: str) -> "AuditRecord":
        obj = json.loads(line)
        return AuditRecord(
            seq=obj["seq"],
            observed_at=obj["observed_at"],
            kind=obj["kind"],
            summary=obj["summary"],
            prev_hash=bytes.fromhex(obj["prev_hash"]),
            hash=bytes.fromhex(obj["hash"]),
        )


def canonical_payload(seq: int, observed_at: int, kind: str, summary: Dict[str, str]) -> bytes:
    """Canonical serialization hashed into the chain.

    Keys sorted lexicographically, UTF-8, no insignificant whitespace,
    integers in minimal decimal form.
    """
    return json.dumps(
        {"kind": kind, "observed_at": observed_at, "seq": seq, "summary": summary},
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    ).encode("utf-8")


def record_hash(prev_hash: bytes, seq: int, observed_at: int, kind: str, summary: Dict[str, str]) -> bytes:
    return hashlib.sha256(prev_hash + canonical_payload(seq, observed_at, kind, summary)).digest()


@dataclass(frozen=True)
class Broken:
    first_bad_seq: int


OK = "ok"


def verify_chain(records: Iterable[AuditRecord]) -> Union[str, Broken]:
    """Recompute every hash; Ok iff all match and seq runs gaplessly from 0."""
    prev = GENESIS_PREV
    expected_seq = 0
    for rec in records:
        if rec.seq != expected_seq or rec.prev_hash != prev:
            return Broken(first_bad_seq=rec.seq if rec.seq < expected_seq else expected_seq)
        if record_hash(prev, rec.seq, rec.observed_at, rec.kind, rec.summary) != rec.hash:
            return Broken(first_bad_seq=rec.seq)
        prev = rec.hash
        expected_seq += 1
    return OK


def read_log(path: str) -> List[AuditRecord]:
    records: List[AuditRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(AuditRecord.from_json_line(line))
    return records


class AuditLog:
    """Single-writer append-only log. Appends are serialized; readers may
    stream the file concurrently (records never change once written).

    A persistence failure does not take the gateway down: the record is kept
    in memory, the chain stays intact, and `healthy` flips to False so the
    operator sees it.
    """

    def __init__(self, path: Optional[str] = None, clock: Clock = SYSTEM_CLOCK):
        self._path = path
        self._clock = clock
        self._lock = threading.Lock()
        self._records: List[AuditRecord] = []
        self._prev = GENESIS_PREV
        self._seq = 0
        self.healthy = True
        self._listeners: List = []
        if path and os.path.exists(path):
            for rec in read_log(path):
                self._records.append(rec)
                self._prev = rec.hash
                self._seq = rec.seq + 1

    @property
    def path(self) -> Optional[str]:
        return self._path

    def append(self, kind: str, summary: Dict[str, str]) -> AuditRecord:
        if kind not in KINDS:
            raise ValueError(f"unknown audit kind: {kind}")
        clean = {str(k): redact_text(str(v)) for k, v in summary.items()}
        with self._lock:
            now_ms = self._clock.wall_ms()
            rec = AuditRecord(
                seq=self._seq,
                observed_at=now_ms,
                kind=kind,
                summary=clean,
                prev_hash=self._prev,
                hash=record_hash(self._prev, self._seq, now_ms, kind, clean),
            )
            self._records.append(rec)
            self._prev = rec.hash
            self._seq += 1
            if self._path:
                try:
                    with open(self._path, "a", encoding="utf-8") as fh:
                        fh.write(rec.to_json_line() + "\n")
                        fh.flush()
                except OSError:
                    self.healthy = False
            listeners = list(self._listeners)
        for cb in listeners:
            try:
                cb(rec)
            except Exception:
                pass
        return rec

    def subscribe(self, callback) -> None:
        """Register a callback invoked with each sealed record (used by the SSE tail)."""
        with self._lock:
            self._listeners.append(callback)

    def unsubscribe(self, callback) -> None:
        with self._lock:
            if callback in self._listeners:
                self._listeners.remove(callback)

    def records(self) -> List[AuditRecord]:
        with self._lock:
            return list(self._records)

    def tail(self, n: int = 50) -> List[AuditRecord]:
        with self._lock:
            return list(self._records[-n:])

    def verify(self) -> Union[str, Broken]:
        return verify_chain(self.records())
