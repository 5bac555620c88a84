"""Upstream connector and request/stream proxying.

The connector abstraction is the seam where an encrypted-tunnel transport
could plug in later; the shipped implementation speaks plain HTTP to
loopback/LAN upstreams.
"""

from __future__ import annotations

import http.client
import socket
from typing import Iterator, List, Optional, Tuple
from urllib.parse import urlsplit

from .httpmodel import HOP_BY_HOP, HttpExchange, Response

SSE_CONTENT_TYPE = "text/event-stream"
UPSTREAM_TIMEOUT = 10.0  # connect/first-byte; streams then run unbounded
STREAM_CHUNK = 8192


class UpstreamUnreachable(Exception):
    pass


class DirectHttpConnector:
    """Plain HTTP(S) to the upstream address; the only shipped connector."""

    def open(self, upstream_url: str) -> http.client.HTTPConnection:
        split = urlsplit(upstream_url)
        cls = http.client.HTTPSConnection if split.scheme == "https" else http.client.HTTPConnection
        conn = cls(split.hostname, split.port, timeout=UPSTREAM_TIMEOUT)
        try:
            conn.connect()
        except (ConnectionRefusedError, socket.timeout, OSError) as exc:
            raise UpstreamUnreachable(str(exc)) from exc
        return conn


def _outbound_headers(req: HttpExchange, upstream_netloc: str, mutations: List[Tuple[str, str]]):
    headers = req.headers.without_hop_by_hop()
    # Authorization material never reaches backends; identity travels in the
    # X-Forwarded-User mutation from forward auth instead.
    headers.remove("Authorization")
    headers.set("Host", upstream_netloc)
    headers.set("X-Forwarded-Host", req.host)
    headers.set("X-Forwarded-For", req.peer_ip)
    for name, value in mutations:
        headers.set(name, value)
    return headers


def _stream_body(conn: http.client.HTTPConnection, resp: http.client.HTTPResponse, on_close=None) -> Iterator[bytes]:
    """Forward frames unmodified and in arrival order; on upstream mid-stream
    disconnect, flush what arrived and close cleanly."""
    try:
        while True:
            try:
                chunk = resp.read1(STREAM_CHUNK)
            except (http.client.IncompleteRead, ConnectionResetError, OSError):
                break
            if not chunk:
                break
            yield chunk
    finally:
        try:
            conn.close()
        finally:
            if on_close is not None:
                on_close()


def proxy_request(
    req: HttpExchange,
    upstream_url: str,
    mutations: List[Tuple[str, str]],
    connector: Optional[DirectHttpConnector] = None,
    on_stream_close=None,
) -> Response:
    """Relay one exchange to the upstream. SSE responses stream through
    unbuffered; anything else is relayed whole. Raises UpstreamUnreachable
    when the backend cannot be reached (callers render 502 + audit)."""
    connector = connector or DirectHttpConnector()
    split = urlsplit(upstream_url)
    conn = connector.open(upstream_url)

    target = req.path + (f"?{req.query}" if req.query else "")
    headers = _outbound_headers(req, split.netloc, mutations)
    try:
        conn.putrequest(req.method, target, skip_host=True, skip_accept_encoding=True)
        for name, value in headers:
            conn.putheader(name, value)
        if req.body:
            conn.putheader("Content-Length", str(len(req.body)))
        conn.endheaders(req.body if req.body else None)
        upstream_resp = conn.getresponse()
    except (socket.timeout, ConnectionError, OSError) as exc:
        conn.close()
        raise UpstreamUnreachable(str(exc)) from exc

    resp_headers = [
        (name, value)
        for name, value in upstream_resp.getheaders()
        if name.lower() not in HOP_BY_HOP and name.lower() != "content-length"
    ]
    content_type = (upstream_resp.getheader("Content-Type") or "").lower()

    if content_type.startswith(SSE_CONTENT_TYPE):
        stream = _stream_body(conn, upstream_resp, on_close=on_stream_close)
        return Response(status=upstream_resp.status, headers=resp_headers, stream=stream)

    body = upstream_resp.read()
    conn.close()
    if on_stream_close is not None:
        on_stream_close()
    return Response(status=upstream_resp.status, headers=resp_headers, body=body)
