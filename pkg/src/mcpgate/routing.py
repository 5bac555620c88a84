"""Route matching and middleware chain execution."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

from .httpmodel import Decision, HttpExchange

# A middleware takes the exchange and its matched route, returns a Decision.
Middleware = Callable[[HttpExchange, "RouteConfig"], Decision]


@dataclass(frozen=True)
class RouteConfig:
    id: str
    host_rule: str  # exact host name
    backend_id: str
    path_prefix: str = "/"
    middleware_ids: tuple = ()
    tls_required: bool = False


def _prefix_matches(prefix: str, path: str) -> bool:
    """Segment-aware prefix match: "/sse" covers "/sse" and "/sse/...",
    never "/ssex"."""
    if prefix == "/":
        return True
    prefix = prefix.rstrip("/")
    return path == prefix or path.startswith(prefix + "/")


def route_request(req: HttpExchange, table: Sequence[RouteConfig]) -> Optional[RouteConfig]:
    """Longest path-prefix wins among routes whose host_rule equals req.host;
    ties break by route id lexicographic order. None means 404."""
    best: Optional[RouteConfig] = None
    best_len = -1
    for route in table:
        if route.host_rule != req.host:
            continue
        if not _prefix_matches(route.path_prefix, req.path):
            continue
        plen = len(route.path_prefix.rstrip("/")) if route.path_prefix != "/" else 0
        if plen > best_len or (plen == best_len and best is not None and route.id < best.id):
            best = route
            best_len = plen
    return best


@dataclass
class NamedMiddleware:
    id: str
    fn: Middleware


def run_chain(
    req: HttpExchange,
    route: RouteConfig,
    chain: List[NamedMiddleware],
    on_error=None,
) -> Decision:
    """Middlewares execute in declared order; the first ShortCircuit halts the
    chain and is returned. If all Continue, their header mutations are merged
    into one Continue. An internal middleware failure becomes a 500 (and
    `on_error` is told, so an audit record can be emitted)."""
    mutations = []
    for mw in chain:
        try:
            decision = mw.fn(req, route)
        except Exception as exc:  # noqa: BLE001 - fail closed, never crash the listener
            if on_error is not None:
                on_error(mw.id, exc)
            return Decision.halt(500, body=b"internal middleware error")
        if decision.short_circuit:
            return decision
        mutations.extend(decision.mutations)
    return Decision.proceed(mutations)
