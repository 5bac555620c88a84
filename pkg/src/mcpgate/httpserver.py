"""Threaded HTTP listener adapting raw requests to HttpExchange and back.

One listener per configured entry point. Long-lived SSE responses are served
from their own thread (ThreadingHTTPServer), so streams never block the
accept loop. TLS is optional: plaintext for tests, operator-supplied cert
files in production.
"""

from __future__ import annotations

import ssl
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Optional, Tuple
from urllib.parse import urlsplit

from .clock import SYSTEM_CLOCK, Clock
from .httpmodel import Headers, HttpExchange, Response

App = Callable[[HttpExchange], Response]

MAX_REQUEST_BODY = 16 * 1024 * 1024


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "mcpgate"

    def log_message(self, fmt, *args):  # request logging goes through audit, not stderr
        pass

    def _exchange(self) -> Optional[HttpExchange]:
        length = int(self.headers.get("Content-Length", 0) or 0)
        if length > MAX_REQUEST_BODY:
            self.send_error(413)
            return None
        body = self.rfile.read(length) if length else b""
        split = urlsplit(self.path)
        headers = Headers(self.headers.items())
        return HttpExchange(
            method=self.command,
            host=self.headers.get("Host", ""),
            path=split.path,
            query=split.query,
            headers=headers,
            body=body,
            peer_ip=self.client_address[0],
            peer_port=self.client_address[1],
            received_at=self.server.clock.monotonic(),
            scheme=self.server.scheme,
        )

    def _respond(self, resp: Response) -> None:
        self.send_response(resp.status)
        seen_type = False
        for name, value in resp.headers:
            if name.lower() in ("content-length", "connection", "transfer-encoding"):
                continue
            if name.lower() == "content-type":
                seen_type = True
            self.send_header(name, value)
        if resp.stream is not None:
            # Stream until the producer stops; connection-close delimited.
            if not seen_type:
                self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Connection", "close")
            self.end_headers()
            try:
                for chunk in resp.stream:
                    if chunk:
                        self.wfile.write(chunk)
                        self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError):
                pass
            self.close_connection = True
        else:
            self.send_header("Content-Length", str(len(resp.body)))
            self.end_headers()
            if self.command != "HEAD" and resp.body:
                self.wfile.write(resp.body)

    def _handle(self) -> None:
        exchange = self._exchange()
        if exchange is None:
            return
        try:
            resp = self.server.app(exchange)
        except Exception:  # noqa: BLE001 - the listener must survive app bugs
            resp = Response(status=500, body=b"internal error")
        self._respond(resp)

    do_GET = _handle
    do_POST = _handle
    do_PUT = _handle
    do_DELETE = _handle
    do_HEAD = _handle
    do_PATCH = _handle
    do_OPTIONS = _handle


class Listener:
    def __init__(
        self,
        app: App,
        host: str = "127.0.0.1",
        port: int = 0,
        tls_cert: Optional[str] = None,
        tls_key: Optional[str] = None,
        clock: Clock = SYSTEM_CLOCK,
    ):
        self._server = ThreadingHTTPServer((host, port), _Handler)
        self._server.daemon_threads = True
        self._server.app = app
        self._server.clock = clock
        self._server.scheme = "https" if tls_cert else "http"
        if tls_cert:
            context = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
            context.load_cert_chain(tls_cert, tls_key)
            self._server.socket = context.wrap_socket(self._server.socket, server_side=True)
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> Tuple[str, int]:
        return self._server.server_address[:2]

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
