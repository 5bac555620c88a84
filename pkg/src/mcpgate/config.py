"""Declarative gateway configuration.

One YAML document describes listeners, the oauth issuer, middlewares, threat
rules, backends and routers. Loading is all-or-nothing: any unresolved
reference, duplicate id or uncompilable rule rejects the whole document with
path-addressed diagnostics (fail-closed), and a valid document yields an
immutable snapshot model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
from urllib.parse import urlparse

import yaml

from .inspection.rules import RuleCompileError, RuleSet, ThreatRule, compile_rules
from .oauth.service import OAuthConfig
from .policy import RateLimitSpec
from .routing import RouteConfig

MIDDLEWARE_TYPES = ("forward_auth", "redirect_wellknown", "rate_limit", "ban_check", "inspect")


@dataclass(frozen=True)
class ListenerSpec:
    name: str
    address: str  # "host:port"
    tls_cert: Optional[str] = None
    tls_key: Optional[str] = None

    @property
    def host(self) -> str:
        return self.address.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.address.rsplit(":", 1)[1])


@dataclass(frozen=True)
class AdminPrincipalSpec:
    name: str
    api_key: str  # hashed at runtime; see admin.PrincipalStore
    permissions: str = "read"  # read | write


@dataclass(frozen=True)
class AdminSpec:
    address: str
    principals: Tuple[AdminPrincipalSpec, ...] = ()


@dataclass(frozen=True)
class BackendDescriptor:
    id: str
    display_name: str
    upstream_url: str
    transport: str = "sse"


@dataclass(frozen=True)
class MiddlewareSpec:
    name: str
    type: str
    rate_limit: Optional[RateLimitSpec] = None
    rule_ids: Tuple[str, ...] = ()  # inspect
    inspect_responses: bool = False


@dataclass
class GatewayConfig:
    entry_points: Dict[str, ListenerSpec]
    oauth: OAuthConfig
    middlewares: Dict[str, MiddlewareSpec]
    rules: List[ThreatRule]
    ruleset: RuleSet
    backends: Dict[str, BackendDescriptor]
    routes: List[RouteConfig]
    admin: Optional[AdminSpec] = None
    state_dir: Optional[str] = None
    health_interval: float = 15.0

    def to_dict(self) -> Dict:
        """Serializable form; load_config(yaml.dump(to_dict())) round-trips."""
        doc: Dict = {
            "entry_points": {
                name: {
                    "address": ep.address,
                    **({"tls": {"cert": ep.tls_cert, "key": ep.tls_key}} if ep.tls_cert else {}),
                }
                for name, ep in self.entry_points.items()
            },
            "oauth": {
                "issuer": self.oauth.issuer,
                "users": list(self.oauth.users),
                **(
                    {"default_resource_host": self.oauth.default_resource_host}
                    if self.oauth.default_resource_host
                    else {}
                ),
            },
            "middlewares": {},
            "rules": [],
            "backends": [],
            "routers": [],
        }
        for name, mw in self.middlewares.items():
            entry: Dict = {"type": mw.type}
            if mw.type == "rate_limit" and mw.rate_limit:
                entry.update(
                    {"rate": mw.rate_limit.rate, "burst": mw.rate_limit.burst, "key_by": mw.rate_limit.key_by}
                )
            if mw.type == "inspect":
                entry["rules"] = list(mw.rule_ids)
                if mw.inspect_responses:
                    entry["inspect_responses"] = True
            doc["middlewares"][name] = entry
        for rule in self.rules:
            entry = {
                "id": rule.id,
                "target": rule.target,
                "pattern": {"kind": rule.pattern_kind, "value": rule.pattern},
                "severity": rule.severity,
                "action": rule.action,
            }
            if rule.action == "ban":
                entry["ttl"] = rule.ban_ttl
            doc["rules"].append(entry)
        for backend in self.backends.values():
            doc["backends"].append(
                {
                    "id": backend.id,
                    "display_name": backend.display_name,
                    "upstream_url": backend.upstream_url,
                    "transport": backend.transport,
                }
            )
        for route in self.routes:
            doc["routers"].append(
                {
                    "id": route.id,
                    "host_rule": route.host_rule,
                    "path_prefix": route.path_prefix,
                    "middlewares": list(route.middleware_ids),
                    "backend": route.backend_id,
                    **({"tls_required": True} if route.tls_required else {}),
                }
            )
        if self.admin is not None:
            doc["admin"] = {
                "address": self.admin.address,
                "principals": [
                    {"name": p.name, "api_key": p.api_key, "permissions": p.permissions}
                    for p in self.admin.principals
                ],
            }
        if self.state_dir:
            doc["state_dir"] = self.state_dir
        if self.health_interval != 15.0:
            doc["health_interval"] = self.health_interval
        return doc


class Diagnostics(list):
    def add(self, path: str, message: str) -> None:
        self.append(f"{path}: {message}")


def _parse_rules(raw, diags: Diagnostics) -> List[ThreatRule]:
    rules: List[ThreatRule] = []
    if raw is None:
        return rules
    if not isinstance(raw, list):
        diags.add("rules", "must be a list")
        return rules
    for i, obj in enumerate(raw):
        path = f"rules[{i}]"
        if not isinstance(obj, dict):
            diags.add(path, "must be an object")
            continue
        pattern = obj.get("pattern") or {}
        if not isinstance(pattern, dict):
            diags.add(f"{path}.pattern", "must be an object with kind/value")
            continue
        try:
            rules.append(
                ThreatRule(
                    id=str(obj.get("id", "")),
                    target=str(obj.get("target", "")),
                    pattern_kind=str(pattern.get("kind", "")),
                    pattern=str(pattern.get("value", "")),
                    severity=str(obj.get("severity", "medium")),
                    action=str(obj.get("action", "log")),
                    ban_ttl=float(obj.get("ttl", 0.0)),
                )
            )
        except (TypeError, ValueError) as exc:
            diags.add(path, str(exc))
    return rules


def validate_backend_descriptor(obj: Dict, path: str, diags: Diagnostics) -> Optional[BackendDescriptor]:
    backend_id = str(obj.get("id", "")).strip()
    if not backend_id:
        diags.add(f"{path}.id", "required")
        return None
    upstream = str(obj.get("upstream_url", "")).strip()
    parsed = urlparse(upstream)
    if parsed.scheme not in ("http", "https") or not parsed.netloc:
        diags.add(f"{path}.upstream_url", "must be an absolute http(s) URL")
        return None
    if parsed.username or parsed.password:
        diags.add(f"{path}.upstream_url", "must not carry credentials")
        return None
    transport = str(obj.get("transport", "sse"))
    if transport != "sse":
        diags.add(f"{path}.transport", f"unsupported transport {transport!r}")
        return None
    return BackendDescriptor(
        id=backend_id,
        display_name=str(obj.get("display_name", backend_id)),
        upstream_url=upstream.rstrip("/"),
        transport=transport,
    )


def load_config(text) -> Tuple[Optional[GatewayConfig], List[str]]:
    """Parse + validate; returns (config, []) or (None, diagnostics)."""
    diags = Diagnostics()
    if isinstance(text, bytes):
        text = text.decode("utf-8", "replace")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        return None, [f"document: not valid YAML: {exc}"]
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        return None, ["document: top level must be a mapping"]

    # entry points ---------------------------------------------------------
    entry_points: Dict[str, ListenerSpec] = {}
    raw_eps = doc.get("entry_points")
    if not isinstance(raw_eps, dict) or not raw_eps:
        diags.add("entry_points", "required: at least one listener")
    else:
        for name, obj in raw_eps.items():
            path = f"entry_points.{name}"
            obj = obj or {}
            address = str(obj.get("address", "")).strip()
            if ":" not in address:
                diags.add(f"{path}.address", 'required, format "host:port"')
                continue
            tls = obj.get("tls") or {}
            entry_points[name] = ListenerSpec(
                name=name,
                address=address,
                tls_cert=tls.get("cert"),
                tls_key=tls.get("key"),
            )

    # oauth ----------------------------------------------------------------
    oauth = None
    raw_oauth = doc.get("oauth")
    if not isinstance(raw_oauth, dict) or not raw_oauth.get("issuer"):
        diags.add("oauth.issuer", "required: exactly one oauth issuer host")
    else:
        issuer = str(raw_oauth["issuer"]).rstrip("/")
        parsed = urlparse(issuer)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            diags.add("oauth.issuer", "must be an absolute http(s) URL")
        else:
            users = raw_oauth.get("users") or []
            oauth = OAuthConfig(
                issuer=issuer,
                users=[str(u) for u in users],
                default_resource_host=str(raw_oauth.get("default_resource_host", "")),
            )

    # rules ----------------------------------------------------------------
    rules = _parse_rules(doc.get("rules"), diags)
    ruleset = None
    if not diags:
        try:
            ruleset = compile_rules(rules)
        except RuleCompileError as exc:
            diags.add("rules", str(exc))
    rule_ids = {r.id for r in rules}

    # middlewares ----------------------------------------------------------
    middlewares: Dict[str, MiddlewareSpec] = {}
    raw_mws = doc.get("middlewares") or {}
    if not isinstance(raw_mws, dict):
        diags.add("middlewares", "must be a mapping")
        raw_mws = {}
    for name, obj in raw_mws.items():
        path = f"middlewares.{name}"
        obj = obj or {}
        mw_type = str(obj.get("type", ""))
        if mw_type not in MIDDLEWARE_TYPES:
            diags.add(f"{path}.type", f"unknown middleware type {mw_type!r}")
            continue
        spec = MiddlewareSpec(name=name, type=mw_type)
        if mw_type == "rate_limit":
            try:
                spec = MiddlewareSpec(
                    name=name,
                    type=mw_type,
                    rate_limit=RateLimitSpec(
                        rate=float(obj.get("rate", 0)),
                        burst=int(obj.get("burst", 0)),
                        key_by=str(obj.get("key_by", "peer_ip")),
                    ),
                )
            except (TypeError, ValueError) as exc:
                diags.add(path, str(exc))
                continue
        elif mw_type == "inspect":
            refs = tuple(str(r) for r in (obj.get("rules") or []))
            for j, ref in enumerate(refs):
                if ref not in rule_ids:
                    diags.add(f"{path}.rules[{j}]", f"unknown rule {ref!r}")
            spec = MiddlewareSpec(
                name=name,
                type=mw_type,
                rule_ids=refs,
                inspect_responses=bool(obj.get("inspect_responses", False)),
            )
        middlewares[name] = spec

    # backends -------------------------------------------------------------
    backends: Dict[str, BackendDescriptor] = {}
    for i, obj in enumerate(doc.get("backends") or []):
        path = f"backends[{i}]"
        if not isinstance(obj, dict):
            diags.add(path, "must be an object")
            continue
        backend = validate_backend_descriptor(obj, path, diags)
        if backend is None:
            continue
        if backend.id in backends:
            diags.add(f"{path}.id", f"duplicate backend id {backend.id!r}")
            continue
        backends[backend.id] = backend

    # routers --------------------------------------------------------------
    routes: List[RouteConfig] = []
    seen_route_ids = set()
    seen_host_prefix = set()
    for i, obj in enumerate(doc.get("routers") or []):
        path = f"routers[{i}]"
        if not isinstance(obj, dict):
            diags.add(path, "must be an object")
            continue
        route_id = str(obj.get("id", "")).strip()
        if not route_id:
            diags.add(f"{path}.id", "required")
            continue
        if route_id in seen_route_ids:
            diags.add(f"{path}.id", f"duplicate route id {route_id!r}")
            continue
        seen_route_ids.add(route_id)
        host_rule = str(obj.get("host_rule", "")).strip().lower()
        if not host_rule:
            diags.add(f"{path}.host_rule", "required")
            continue
        prefix = str(obj.get("path_prefix", "/"))
        if not prefix.startswith("/"):
            diags.add(f"{path}.path_prefix", "must be an absolute path")
            continue
        if (host_rule, prefix) in seen_host_prefix:
            diags.add(path, f"duplicate (host_rule, path_prefix) pair ({host_rule}, {prefix})")
            continue
        seen_host_prefix.add((host_rule, prefix))
        mw_ids = [str(m) for m in (obj.get("middlewares") or [])]
        ok = True
        for j, mw_id in enumerate(mw_ids):
            if mw_id not in middlewares:
                diags.add(f"{path}.middleware_ids[{j}]", f"unknown middleware {mw_id!r}")
                ok = False
        backend_id = str(obj.get("backend", "")).strip()
        if backend_id not in backends:
            diags.add(f"{path}.backend", f"unknown backend {backend_id!r}")
            ok = False
        if not ok:
            continue
        routes.append(
            RouteConfig(
                id=route_id,
                host_rule=host_rule,
                backend_id=backend_id,
                path_prefix=prefix,
                middleware_ids=tuple(mw_ids),
                tls_required=bool(obj.get("tls_required", False)),
            )
        )

    # admin ----------------------------------------------------------------
    admin = None
    raw_admin = doc.get("admin")
    if isinstance(raw_admin, dict):
        address = str(raw_admin.get("address", "")).strip()
        if ":" not in address:
            diags.add("admin.address", 'required, format "host:port"')
        principals = []
        for i, obj in enumerate(raw_admin.get("principals") or []):
            path = f"admin.principals[{i}]"
            if not isinstance(obj, dict) or not obj.get("name") or not obj.get("api_key"):
                diags.add(path, "name and api_key are required")
                continue
            perms = str(obj.get("permissions", "read"))
            if perms not in ("read", "write"):
                diags.add(f"{path}.permissions", f"must be read or write, got {perms!r}")
                continue
            principals.append(
                AdminPrincipalSpec(name=str(obj["name"]), api_key=str(obj["api_key"]), permissions=perms)
            )
        if ":" in address:
            admin = AdminSpec(address=address, principals=tuple(principals))

    if diags:
        return None, list(diags)

    return (
        GatewayConfig(
            entry_points=entry_points,
            oauth=oauth,
            middlewares=middlewares,
            rules=rules,
            ruleset=ruleset,
            backends=backends,
            routes=routes,
            admin=admin,
            state_dir=str(doc["state_dir"]) if doc.get("state_dir") else None,
            health_interval=float(doc.get("health_interval", 15.0)),
        ),
        [],
    )
