"""Strict JSON-RPC / MCP envelope validation.

Anything that is not a well-formed JSON-RPC 2.0 message using an allowlisted
MCP method is rejected with a machine-readable violation code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, List, Optional, Union

MAX_MESSAGE_BYTES = 1024 * 1024  # bodies above this are rejected unparsed

# Methods the gateway lets through to backends. notifications/* is a prefix.
ALLOWED_METHODS = frozenset(
    {
        "initialize",
        "tools/list",
        "tools/call",
        "resources/list",
        "resources/read",
        "prompts/list",
        "prompts/get",
        "ping",
    }
)
NOTIFICATION_PREFIX = "notifications/"

CLIENT_TO_SERVER = "client_to_server"
SERVER_TO_CLIENT = "server_to_client"


@dataclass(frozen=True)
class Violation:
    code: str  # not_json | bad_envelope | unknown_method | oversize
    detail: str


@dataclass
class McpMessage:
    raw: bytes
    parsed: Any
    direction: str
    kind: str  # request | response | notification
    method: Optional[str] = None
    id: Union[str, int, None] = None


def validate_mcp_message(body: bytes, direction: str = CLIENT_TO_SERVER) -> Union[McpMessage, List[Violation]]:
    if len(body) > MAX_MESSAGE_BYTES:
        return [Violation("oversize", f"body is {len(body)} bytes, limit {MAX_MESSAGE_BYTES}")]

    try:
        parsed = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        return [Violation("not_json", str(exc))]

    violations: List[Violation] = []
    if not isinstance(parsed, dict):
        return [Violation("bad_envelope", "message is not a JSON object")]

    if parsed.get("jsonrpc") != "2.0":
        violations.append(Violation("bad_envelope", 'member "jsonrpc" must equal "2.0"'))

    has_method = "method" in parsed
    has_id = "id" in parsed
    msg_id = parsed.get("id")
    if has_id and not isinstance(msg_id, (str, int)):
        violations.append(Violation("bad_envelope", "id must be a string or number"))
        has_id = False

    if has_method:
        method = parsed["method"]
        if not isinstance(method, str) or not method:
            violations.append(Violation("bad_envelope", "method must be a non-empty string"))
            method = None
        kind = "request" if has_id else "notification"
        if method is not None:
            if kind == "notification":
                if not method.startswith(NOTIFICATION_PREFIX):
                    violations.append(
                        Violation("unknown_method", f"notification method not allowed: {method}")
                    )
            elif method not in ALLOWED_METHODS:
                violations.append(Violation("unknown_method", f"method not in allowlist: {method}"))
        if "params" in parsed and not isinstance(parsed["params"], (dict, list)):
            violations.append(Violation("bad_envelope", "params must be an object or array"))
    else:
        # Responses carry an id plus exactly one of result / error.
        kind = "response"
        method = None
        if not has_id:
            violations.append(Violation("bad_envelope", "message has neither method nor id"))
        if ("result" in parsed) == ("error" in parsed):
            violations.append(Violation("bad_envelope", "response needs exactly one of result/error"))

    if violations:
        return violations
    return McpMessage(raw=body, parsed=parsed, direction=direction, kind=kind, method=method, id=msg_id)
