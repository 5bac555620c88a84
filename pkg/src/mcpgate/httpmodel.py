"""Core HTTP carrier types shared by the gateway, middlewares and backends."""

from __future__ import annotations

import posixpath
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Optional, Tuple

# Hop-by-hop headers are connection-scoped; stripped in both proxy directions.
HOP_BY_HOP = frozenset(
    {
        "connection",
        "keep-alive",
        "proxy-authenticate",
        "proxy-authorization",
        "te",
        "trailer",
        "transfer-encoding",
        "upgrade",
    }
)


class Headers:
    """Ordered, case-insensitive multimap of header name -> value."""

    def __init__(self, items: Optional[Iterable[Tuple[str, str]]] = None):
        self._items: List[Tuple[str, str]] = []
        for name, value in items or []:
            self.add(name, value)

    def add(self, name: str, value: str) -> None:
        self._items.append((name, value))

    def set(self, name: str, value: str) -> None:
        """Replace all occurrences of `name` (add if absent)."""
        self.remove(name)
        self.add(name, value)

    def remove(self, name: str) -> None:
        low = name.lower()
        self._items = [(n, v) for n, v in self._items if n.lower() != low]

    def get(self, name: str) -> Optional[str]:
        low = name.lower()
        for n, v in self._items:
            if n.lower() == low:
                return v
        return None

    def get_all(self, name: str) -> List[str]:
        low = name.lower()
        return [v for n, v in self._items if n.lower() == low]

    def __contains__(self, name: str) -> bool:
        return self.get(name) is not None

    def __iter__(self) -> Iterator[Tuple[str, str]]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def copy(self) -> "Headers":
        return Headers(self._items)

    def without_hop_by_hop(self) -> "Headers":
        return Headers((n, v) for n, v in self._items if n.lower() not in HOP_BY_HOP)


def normalize_path(raw: str) -> str:
    """Collapse '.' and '..' segments and force a leading slash.

    A trailing slash is preserved (it is routing-significant).
    """
    if not raw.startswith("/"):
        raw = "/" + raw
    normalized = posixpath.normpath(raw)
    if raw.endswith("/") and normalized != "/":
        normalized += "/"
    return normalized


def split_host(raw_host: str) -> str:
    """Lowercase the Host header value and strip any port component."""
    host = raw_host.strip().lower()
    if host.startswith("["):  # bracketed IPv6 literal
        end = host.find("]")
        return host[: end + 1] if end >= 0 else host
    if ":" in host:
        host = host.split(":", 1)[0]
    return host


@dataclass
class HttpExchange:
    method: str
    host: str
    path: str
    headers: Headers
    body: bytes = b""
    peer_ip: str = ""
    peer_port: int = 0
    received_at: float = 0.0
    query: str = ""
    scheme: str = "http"
    # Request-scoped attributes set by middlewares (e.g. authenticated
    # subject/client_id from forward auth) for later pipeline stages.
    attrs: dict = field(default_factory=dict)

    def __post_init__(self):
        self.host = split_host(self.host)
        self.path = normalize_path(self.path)

    def bearer_token(self) -> Optional[str]:
        auth = self.headers.get("Authorization")
        if auth is None:
            return None
        parts = auth.split(None, 1)
        if len(parts) != 2 or parts[0].lower() != "bearer":
            return None
        return parts[1].strip()


@dataclass
class Decision:
    """Outcome of one middleware (or a whole chain).

    Continue carries header mutations to apply to the upstream request;
    ShortCircuit carries a complete client response.
    """

    short_circuit: bool
    status: int = 0
    headers: List[Tuple[str, str]] = field(default_factory=list)
    body: bytes = b""
    mutations: List[Tuple[str, str]] = field(default_factory=list)

    @staticmethod
    def proceed(mutations: Optional[List[Tuple[str, str]]] = None) -> "Decision":
        return Decision(short_circuit=False, mutations=list(mutations or []))

    @staticmethod
    def halt(
        status: int,
        headers: Optional[List[Tuple[str, str]]] = None,
        body: bytes = b"",
    ) -> "Decision":
        return Decision(
            short_circuit=True, status=status, headers=list(headers or []), body=body
        )


@dataclass
class Response:
    """A response produced by an in-process app or the proxy layer."""

    status: int
    headers: List[Tuple[str, str]] = field(default_factory=list)
    body: bytes = b""
    stream: Optional[Iterable[bytes]] = None  # takes precedence over body

    def header(self, name: str) -> Optional[str]:
        low = name.lower()
        for n, v in self.headers:
            if n.lower() == low:
                return v
        return None
