from .protocol import ALLOWED_METHODS, McpMessage, Violation, validate_mcp_message
from .poisoning import Finding, scan_tool_descriptions
from .rules import (
    DetectionEvent,
    DetectionLog,
    RuleSet,
    ThreatRule,
    compile_rules,
    evaluate_rules,
)

__all__ = [
    "ALLOWED_METHODS",
    "McpMessage",
    "Violation",
    "validate_mcp_message",
    "Finding",
    "scan_tool_descriptions",
    "ThreatRule",
    "RuleSet",
    "DetectionEvent",
    "DetectionLog",
    "compile_rules",
    "evaluate_rules",
]
