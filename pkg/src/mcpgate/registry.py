"""Backend-server registry: live route/backend snapshot, runtime onboarding
and upstream health checks.

The serving snapshot is immutable; onboarding builds a new snapshot and swaps
it atomically, so in-flight exchanges finish on the table they started with.
Onboarded backends/routes are persisted as one JSON file each under
<state_dir>/onboarded/ and merged over the base config on the next start.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

from .clock import SYSTEM_CLOCK, Clock
from .config import BackendDescriptor, Diagnostics, GatewayConfig, validate_backend_descriptor
from .routing import NamedMiddleware, RouteConfig


@dataclass
class BackendServer:
    id: str
    display_name: str
    upstream_url: str
    transport: str = "sse"
    health: str = "unknown"  # unknown | healthy | unhealthy
    health_since: float = 0.0  # wall clock seconds of last transition
    onboarded_at: float = 0.0

    def to_dict(self) -> Dict:
        return {
            "id": self.id,
            "display_name": self.display_name,
            "upstream_url": self.upstream_url,
            "transport": self.transport,
            "health": self.health,
            "health_since": self.health_since,
            "onboarded_at": self.onboarded_at,
        }


@dataclass(frozen=True)
class Snapshot:
    routes: Tuple[RouteConfig, ...]
    backends: Dict[str, BackendServer]
    version: int = 0


class OnboardError(ValueError):
    def __init__(self, diagnostics: List[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


class Registry:
    def __init__(
        self,
        config: GatewayConfig,
        audit=None,
        clock: Clock = SYSTEM_CLOCK,
    ):
        self._config = config
        self._audit = audit
        self._clock = clock
        self._lock = threading.Lock()
        self._version = 0

        backends = {
            b.id: BackendServer(
                id=b.id,
                display_name=b.display_name,
                upstream_url=b.upstream_url,
                transport=b.transport,
            )
            for b in config.backends.values()
        }
        routes = list(config.routes)

        self._onboard_dir = os.path.join(config.state_dir, "onboarded") if config.state_dir else None
        if self._onboard_dir and os.path.isdir(self._onboard_dir):
            for fname in sorted(os.listdir(self._onboard_dir)):
                if not fname.endswith(".json"):
                    continue
                with open(os.path.join(self._onboard_dir, fname), "r", encoding="utf-8") as fh:
                    obj = json.load(fh)
                backend = BackendServer(**obj["backend"])
                route = RouteConfig(
                    id=obj["route"]["id"],
                    host_rule=obj["route"]["host_rule"],
                    backend_id=obj["route"]["backend_id"],
                    path_prefix=obj["route"].get("path_prefix", "/"),
                    middleware_ids=tuple(obj["route"].get("middleware_ids", [])),
                )
                if backend.id not in backends and all(
                    (r.host_rule, r.path_prefix) != (route.host_rule, route.path_prefix) for r in routes
                ):
                    backends[backend.id] = backend
                    routes.append(route)

        self._snapshot = Snapshot(routes=tuple(routes), backends=backends, version=0)
        self._health_thread: Optional[threading.Thread] = None
        self._stop = threading.Event()

    @property
    def config(self) -> GatewayConfig:
        return self._config

    def snapshot(self) -> Snapshot:
        with self._lock:
            return self._snapshot

    def _swap_locked(self, routes: Tuple[RouteConfig, ...], backends: Dict[str, BackendServer]) -> Snapshot:
        self._version += 1
        self._snapshot = Snapshot(routes=routes, backends=backends, version=self._version)
        return self._snapshot

    # -- onboarding --------------------------------------------------------

    def onboard_server(self, descriptor: Dict) -> Tuple[BackendServer, RouteConfig]:
        """Validate, persist and hot-swap a new backend + route. Unreachable
        upstreams do not block onboarding; the health checker will mark them."""
        diags = Diagnostics()
        host_rule = str(descriptor.get("host_rule", "")).strip().lower()
        if not host_rule:
            diags.add("host_rule", "required")
        middleware_ids = [str(m) for m in (descriptor.get("middleware_ids") or [])]
        for j, mw_id in enumerate(middleware_ids):
            if mw_id not in self._config.middlewares:
                diags.add(f"middleware_ids[{j}]", f"unknown middleware {mw_id!r}")
        backend_id = str(descriptor.get("id") or descriptor.get("display_name", "")).strip().lower().replace(" ", "-")
        desc_for_validation = {
            "id": backend_id,
            "display_name": descriptor.get("display_name", backend_id),
            "upstream_url": descriptor.get("upstream_url", ""),
            "transport": descriptor.get("transport", "sse"),
        }
        parsed = validate_backend_descriptor(desc_for_validation, "descriptor", diags)
        if diags or parsed is None:
            raise OnboardError(list(diags))

        with self._lock:
            snap = self._snapshot
            if any(b == parsed.id for b in snap.backends):
                raise OnboardError([f"descriptor.id: backend id {parsed.id!r} already exists"])
            path_prefix = str(descriptor.get("path_prefix", "/"))
            if any((r.host_rule, r.path_prefix) == (host_rule, path_prefix) for r in snap.routes):
                raise OnboardError([f"host_rule: ({host_rule}, {path_prefix}) collides with an existing route"])

            now_wall = self._clock.wall_ms() / 1000.0
            backend = BackendServer(
                id=parsed.id,
                display_name=parsed.display_name,
                upstream_url=parsed.upstream_url,
                transport=parsed.transport,
                onboarded_at=now_wall,
            )
            route = RouteConfig(
                id=str(descriptor.get("route_id") or f"{parsed.id}-router"),
                host_rule=host_rule,
                backend_id=parsed.id,
                path_prefix=path_prefix,
                middleware_ids=tuple(middleware_ids),
            )
            if any(r.id == route.id for r in snap.routes):
                raise OnboardError([f"route_id: duplicate route id {route.id!r}"])

            backends = dict(snap.backends)
            backends[backend.id] = backend
            self._swap_locked(snap.routes + (route,), backends)

            if self._onboard_dir:
                os.makedirs(self._onboard_dir, exist_ok=True)
                with open(os.path.join(self._onboard_dir, f"{backend.id}.json"), "w", encoding="utf-8") as fh:
                    json.dump(
                        {
                            "backend": {
                                "id": backend.id,
                                "display_name": backend.display_name,
                                "upstream_url": backend.upstream_url,
                                "transport": backend.transport,
                                "onboarded_at": backend.onboarded_at,
                            },
                            "route": {
                                "id": route.id,
                                "host_rule": route.host_rule,
                                "backend_id": route.backend_id,
                                "path_prefix": route.path_prefix,
                                "middleware_ids": list(route.middleware_ids),
                            },
                        },
                        fh,
                        indent=2,
                    )

        if self._audit is not None:
            self._audit.append(
                "config_change",
                {"event": "server_onboarded", "backend_id": backend.id, "route_id": route.id,
                 "host_rule": host_rule},
            )
        return backend, route

    def set_route_middlewares(self, route_id: str, middleware_ids: List[str]) -> RouteConfig:
        for mw_id in middleware_ids:
            if mw_id not in self._config.middlewares:
                raise OnboardError([f"middleware_ids: unknown middleware {mw_id!r}"])
        with self._lock:
            snap = self._snapshot
            routes = list(snap.routes)
            for i, route in enumerate(routes):
                if route.id == route_id:
                    routes[i] = replace(route, middleware_ids=tuple(middleware_ids))
                    self._swap_locked(tuple(routes), dict(snap.backends))
                    updated = routes[i]
                    break
            else:
                raise OnboardError([f"route_id: no route {route_id!r}"])
        if self._audit is not None:
            self._audit.append(
                "config_change",
                {"event": "route_middlewares_changed", "route_id": route_id,
                 "middleware_ids": ",".join(middleware_ids)},
            )
        return updated

    # -- health checks -----------------------------------------------------

    def probe_all(self, prober: Callable[[str], bool]) -> None:
        """One probe pass. Healthy = any response < 500 within the probe
        timeout. Transitions (not every probe) are audited."""
        snap = self.snapshot()
        for backend in list(snap.backends.values()):
            healthy = False
            try:
                healthy = prober(backend.upstream_url)
            except Exception:
                healthy = False
            new_state = "healthy" if healthy else "unhealthy"
            if backend.health != new_state:
                backend.health = new_state
                backend.health_since = self._clock.wall_ms() / 1000.0
                if self._audit is not None:
                    self._audit.append(
                        "config_change",
                        {"event": "health_transition", "backend_id": backend.id, "health": new_state},
                    )

    def start_health_checks(self, prober: Callable[[str], bool], interval: Optional[float] = None) -> None:
        interval = interval if interval is not None else self._config.health_interval

        def loop():
            while not self._stop.wait(interval):
                self.probe_all(prober)

        self._health_thread = threading.Thread(target=loop, name="health-checks", daemon=True)
        self._health_thread.start()

    def stop(self) -> None:
        self._stop.set()


def default_prober(upstream_url: str, timeout: float = 2.0) -> bool:
    import requests

    try:
        resp = requests.get(upstream_url + "/", timeout=timeout, stream=True)
        status = resp.status_code
        resp.close()
        return status < 500
    except requests.RequestException:
        return False
