"""Rule engine turning protocol violations, poisoning findings and traffic
patterns into log / deny / ban actions.

Rule sets are compiled once at config load and are immutable afterwards; an
uncompilable rule set rejects the whole config (fail-closed at startup, never
at request time).
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..clock import SYSTEM_CLOCK, Clock
from ..redact import redact_text
from .poisoning import Finding
from .protocol import Violation

EXCERPT_LIMIT = 256  # bytes of sanitized sample kept per event

ACTION_ORDER = {"log": 0, "deny": 1, "ban": 2}  # ban > deny > log
SEVERITIES = ("low", "medium", "high")
PATTERN_KINDS = ("literal", "iliteral", "regex", "detector")
TARGETS = ("message", "tool_description", "traffic")

# Backreferences would break the linear-time guarantee for inspection cost.
_BACKREF_RE = re.compile(r"\\[1-9]|\(\?P=")


class RuleCompileError(ValueError):
    pass


@dataclass(frozen=True)
class ThreatRule:
    id: str
    target: str
    pattern_kind: str
    pattern: str
    severity: str = "medium"
    action: str = "log"
    ban_ttl: float = 0.0  # seconds, required for ban rules


@dataclass
class _CompiledRule:
    rule: ThreatRule
    regex: Optional[re.Pattern] = None


class RuleSet:
    def __init__(self, compiled: List[_CompiledRule]):
        self._compiled = compiled

    @property
    def rules(self) -> List[ThreatRule]:
        return [c.rule for c in self._compiled]

    def __iter__(self):
        return iter(self._compiled)

    def __len__(self):
        return len(self._compiled)


def compile_rules(rules: List[ThreatRule]) -> RuleSet:
    """Validate and compile a rule list; raises RuleCompileError on the first defect."""
    seen: set = set()
    compiled: List[_CompiledRule] = []
    for rule in rules:
        if rule.id in seen:
            raise RuleCompileError(f"duplicate rule id: {rule.id}")
        seen.add(rule.id)
        if rule.target not in TARGETS:
            raise RuleCompileError(f"rule {rule.id}: unknown target {rule.target!r}")
        if rule.pattern_kind not in PATTERN_KINDS:
            raise RuleCompileError(f"rule {rule.id}: unknown pattern kind {rule.pattern_kind!r}")
        if rule.severity not in SEVERITIES:
            raise RuleCompileError(f"rule {rule.id}: unknown severity {rule.severity!r}")
        if rule.action not in ACTION_ORDER:
            raise RuleCompileError(f"rule {rule.id}: unknown action {rule.action!r}")
        if rule.action == "ban" and rule.ban_ttl <= 0:
            raise RuleCompileError(f"rule {rule.id}: ban rules need a positive ttl")
        regex = None
        if rule.pattern_kind == "regex":
            if _BACKREF_RE.search(rule.pattern):
                raise RuleCompileError(f"rule {rule.id}: backreferences are not allowed")
            try:
                regex = re.compile(rule.pattern)
            except re.error as exc:
                raise RuleCompileError(f"rule {rule.id}: invalid regex: {exc}") from exc
        elif rule.pattern_kind == "literal":
            regex = re.compile(re.escape(rule.pattern))
        elif rule.pattern_kind == "iliteral":
            regex = re.compile(re.escape(rule.pattern), re.IGNORECASE)
        compiled.append(_CompiledRule(rule=rule, regex=regex))
    return RuleSet(compiled)


@dataclass(frozen=True)
class DetectionEvent:
    rule_id: str
    severity: str
    action_taken: str
    peer_ip: str
    client_id: str
    excerpt: str
    observed_at: int  # wall clock ms

    def to_dict(self) -> Dict[str, object]:
        return {
            "rule_id": self.rule_id,
            "severity": self.severity,
            "action_taken": self.action_taken,
            "peer_ip": self.peer_ip,
            "client_id": self.client_id,
            "excerpt": self.excerpt,
            "observed_at": self.observed_at,
        }


class DetectionLog:
    """In-memory ring of recent detection events, served by the admin API."""

    def __init__(self, capacity: int = 1000):
        self._capacity = capacity
        self._lock = threading.Lock()
        self._events: List[DetectionEvent] = []

    def add(self, event: DetectionEvent) -> None:
        with self._lock:
            self._events.append(event)
            if len(self._events) > self._capacity:
                self._events = self._events[-self._capacity :]

    def events(self) -> List[DetectionEvent]:
        with self._lock:
            return list(self._events)


@dataclass
class InspectionContext:
    peer_ip: str = ""
    client_id: str = ""
    body_text: str = ""
    traffic_line: str = ""  # "<METHOD> <host><path>"
    violations: List[Violation] = field(default_factory=list)
    findings: List[Finding] = field(default_factory=list)


@dataclass
class Verdict:
    action: str  # log | deny | ban (or "continue" when nothing matched)
    status: int  # 0 when no short-circuit needed
    events: List[DetectionEvent]
    ban_ttl: float = 0.0
    ban_reason: str = ""


def _excerpt(sample: str) -> str:
    clean = redact_text(sample)
    return clean.encode("utf-8")[:EXCERPT_LIMIT].decode("utf-8", "ignore")


def evaluate_rules(
    context: InspectionContext,
    ruleset: RuleSet,
    clock: Clock = SYSTEM_CLOCK,
) -> Verdict:
    """Every matching rule yields one DetectionEvent; the aggregate action is
    the most severe among matches (ban > deny > log)."""
    matches: List[Tuple[ThreatRule, str, bool]] = []  # (rule, sample, is_protocol)
    for compiled in ruleset:
        rule = compiled.rule
        if rule.target == "message":
            if rule.pattern_kind == "detector":
                for violation in context.violations:
                    if rule.pattern in ("*", violation.code):
                        matches.append((rule, f"{violation.code}: {violation.detail}", True))
                        break
            elif compiled.regex is not None:
                found = compiled.regex.search(context.body_text)
                if found:
                    matches.append((rule, found.group(0), False))
        elif rule.target == "tool_description":
            for finding in context.findings:
                short = finding.rule_id.removeprefix("builtin.")
                if rule.pattern_kind == "detector":
                    if rule.pattern in ("*", finding.rule_id, short):
                        matches.append((rule, f"{finding.rule_id} on {finding.tool}: {finding.detail}", False))
                        break
                elif compiled.regex is not None and compiled.regex.search(finding.detail):
                    matches.append((rule, finding.detail, False))
                    break
        elif rule.target == "traffic":
            if compiled.regex is not None:
                found = compiled.regex.search(context.traffic_line)
                if found:
                    matches.append((rule, context.traffic_line, False))

    if not matches:
        return Verdict(action="continue", status=0, events=[])

    events: List[DetectionEvent] = []
    top_action = "log"
    top_ttl = 0.0
    top_reason = ""
    any_protocol_deny = False
    for rule, sample, is_protocol in matches:
        events.append(
            DetectionEvent(
                rule_id=rule.id,
                severity=rule.severity,
                action_taken=rule.action,
                peer_ip=context.peer_ip,
                client_id=context.client_id,
                excerpt=_excerpt(sample),
                observed_at=clock.wall_ms(),
            )
        )
        if ACTION_ORDER[rule.action] > ACTION_ORDER[top_action]:
            top_action = rule.action
        if rule.action == "ban":
            top_ttl = max(top_ttl, rule.ban_ttl)
            top_reason = top_reason or rule.id
        if rule.action == "deny" and is_protocol:
            any_protocol_deny = True

    if top_action == "log":
        return Verdict(action="log", status=0, events=events)
    if top_action == "ban":
        return Verdict(action="ban", status=403, events=events, ban_ttl=top_ttl, ban_reason=top_reason)
    # deny: 400 for protocol violations, 403 for content rules
    status = 400 if any_protocol_deny else 403
    return Verdict(action="deny", status=status, events=events)
