"""In-process mock MCP server over SSE, deliberately authentication-free.

Answers initialize / tools/list / tools/call from a script, streams numbered
event frames when an event plan is set, and can be toggled unavailable for
health-check tests. Every received exchange is recorded so tests can assert
what the backend actually saw (e.g. no Authorization header, ever).
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from ..httpmodel import HttpExchange, Response
from ..httpserver import Listener


@dataclass
class MockServerScript:
    tools: List[Dict] = field(default_factory=list)
    event_plan: Optional[List[bytes]] = None  # raw SSE frames, emitted verbatim
    tool_results: Dict[str, object] = field(default_factory=dict)


def default_script() -> MockServerScript:
    return MockServerScript(
        tools=[
            {
                "name": "helloworld",
                "description": "Returns a friendly greeting.",
                "input_schema": {"type": "object", "properties": {}},
            }
        ],
        tool_results={"helloworld": {"content": [{"type": "text", "text": "Hello, world!"}]}},
    )


@dataclass
class RecordedRequest:
    method: str
    path: str
    headers: List
    body: bytes


class MockMcpServer:
    def __init__(self, script: Optional[MockServerScript] = None):
        self.script = script or default_script()
        self.requests: List[RecordedRequest] = []
        self.available = True
        self._lock = threading.Lock()
        self._listener: Optional[Listener] = None

    # -- lifecycle ---------------------------------------------------------

    def start(self, port: int = 0) -> None:
        self._listener = Listener(self.handle, host="127.0.0.1", port=port)
        self._listener.start()

    def stop(self) -> None:
        if self._listener is not None:
            self._listener.stop()
            self._listener = None

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self._listener.port}"

    def set_available(self, available: bool) -> None:
        self.available = available

    # -- request handling --------------------------------------------------

    def handle(self, req: HttpExchange) -> Response:
        with self._lock:
            self.requests.append(RecordedRequest(req.method, req.path, list(req.headers), req.body))
        if not self.available:
            return Response(status=503, body=b"scripted outage")

        if req.method == "GET" and req.path == "/sse":
            return self._sse_response()
        if req.method == "POST" and req.path in ("/messages", "/sse"):
            return self._rpc(req.body)
        if req.method == "GET" and req.path == "/":
            return Response(status=200, body=b"mock mcp server")
        return Response(status=404, body=b"")

    def _sse_response(self) -> Response:
        plan = self.script.event_plan

        def stream():
            if plan is not None:
                for frame in plan:
                    yield frame
            else:
                yield b"event: endpoint\ndata: /messages\n\n"

        return Response(status=200, headers=[("Content-Type", "text/event-stream")], stream=stream())

    def _rpc(self, body: bytes) -> Response:
        try:
            msg = json.loads(body.decode("utf-8"))
        except ValueError:
            return self._rpc_error(None, -32700, "parse error")
        method = msg.get("method")
        msg_id = msg.get("id")
        if method == "initialize":
            result = {
                "protocolVersion": "2025-03-26",
                "serverInfo": {"name": "mock-mcp", "version": "0.1"},
                "capabilities": {"tools": {}},
            }
        elif method == "tools/list":
            result = {"tools": self.script.tools}
        elif method == "tools/call":
            name = (msg.get("params") or {}).get("name", "")
            if name not in self.script.tool_results:
                return self._rpc_error(msg_id, -32602, f"unknown tool {name!r}")
            result = self.script.tool_results[name]
        elif method == "ping":
            result = {}
        elif isinstance(method, str) and method.startswith("notifications/"):
            return Response(status=202, body=b"")
        else:
            return self._rpc_error(msg_id, -32601, f"method not found: {method}")
        payload = {"jsonrpc": "2.0", "id": msg_id, "result": result}
        return Response(
            status=200,
            headers=[("Content-Type", "application/json")],
            body=json.dumps(payload).encode(),
        )

    @staticmethod
    def _rpc_error(msg_id, code: int, message: str) -> Response:
        payload = {"jsonrpc": "2.0", "id": msg_id, "error": {"code": code, "message": message}}
        return Response(
            status=200,
            headers=[("Content-Type", "application/json")],
            body=json.dumps(payload).encode(),
        )

    # -- assertions --------------------------------------------------------

    def saw_authorization_header(self) -> bool:
        with self._lock:
            return any(
                any(n.lower() == "authorization" for n, _ in r.headers) for r in self.requests
            )

    def forwarded_user_requests(self) -> int:
        with self._lock:
            return sum(
                1 for r in self.requests if any(n.lower() == "x-forwarded-user" for n, _ in r.headers)
            )


def numbered_event_plan(count: int) -> List[bytes]:
    """SSE frames with sequence numbers; the emitted order is the oracle for
    proxy transparency tests."""
    return [f"id: {i}\ndata: payload-{i}\n\n".encode() for i in range(count)]
