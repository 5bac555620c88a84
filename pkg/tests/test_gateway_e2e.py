import json

import pytest
import requests

from conftest import ADMIN_KEY, READONLY_KEY, ROUTE_HOST, make_gateway
from mcpgate.testkit.client import HostMap, ScriptedClient
from mcpgate.testkit.mockserver import MockMcpServer, MockServerScript, numbered_event_plan


def client_for(gw, subject="alice"):
    return ScriptedClient(HostMap(gw.public_port), ROUTE_HOST, subject=subject)


def admin_url(gw, path):
    return f"http://127.0.0.1:{gw.admin_port}{path}"


def admin(gw, method, path, key=ADMIN_KEY, **kwargs):
    headers = kwargs.pop("headers", {})
    if key is not None:
        headers["X-Admin-Key"] = key
    return requests.request(method, admin_url(gw, path), headers=headers, timeout=10, **kwargs)


def authed_get(gw, token, path="/sse", host=ROUTE_HOST, stream=False):
    return requests.get(
        f"http://127.0.0.1:{gw.public_port}{path}",
        headers={"Host": host, "Authorization": f"Bearer {token}"},
        stream=stream,
        timeout=10,
    )


# -- full client flow --------------------------------------------------------


def test_full_discovery_auth_flow(running_gateway):
    transcript = client_for(running_gateway).run()
    assert transcript.passed, transcript.failed_step()
    assert [s.name for s in transcript.steps] == [
        "unauthenticated_request",
        "metadata_discovery",
        "dynamic_registration",
        "authorize",
        "idp_login",
        "token_exchange",
        "authenticated_retry",
    ]


def test_wrong_verifier_stops_at_token_exchange(running_gateway):
    transcript = client_for(running_gateway).run(wrong_verifier=True)
    assert transcript.steps[-1].name == "token_exchange"
    assert transcript.steps[-1].ok  # "ok" here means the rejection happened as expected
    assert not transcript.access_token


def test_unknown_user_rejected_at_idp(running_gateway):
    transcript = client_for(running_gateway, subject="mallory").run()
    assert not transcript.passed
    assert transcript.failed_step().name == "idp_login"


# -- proxy behaviour ---------------------------------------------------------


def test_sse_frames_relayed_byte_identical(tmp_path):
    plan = numbered_event_plan(1000)
    server = MockMcpServer(MockServerScript(event_plan=plan))
    server.start()
    gw = make_gateway(tmp_path, upstream_url=server.url)
    gw.start(health_prober=None)
    try:
        transcript = client_for(gw).run()
        assert transcript.passed, transcript.failed_step()
        resp = authed_get(gw, transcript.access_token, stream=True)
        body = resp.raw.read()
        assert body == b"".join(plan)
    finally:
        gw.stop()
        server.stop()


def test_backend_never_sees_authorization_header(running_gateway, mock_server):
    transcript = client_for(running_gateway).run()
    assert transcript.passed
    resp = authed_get(running_gateway, transcript.access_token)
    assert resp.status_code == 200
    assert not mock_server.saw_authorization_header()
    assert mock_server.forwarded_user_requests() >= 1


def test_unreachable_upstream_is_502_and_audited(tmp_path):
    gw = make_gateway(tmp_path, upstream_url="http://127.0.0.1:1")  # nothing listens there
    gw.start(health_prober=None)
    try:
        transcript = client_for(gw).run()
        # the final authenticated retry hits the dead upstream
        assert transcript.steps[-1].name == "authenticated_retry"
        assert transcript.steps[-1].status == 502
        outcomes = [r.summary.get("outcome") for r in gw.audit.records() if r.kind == "exchange"]
        assert "upstream_unreachable" in outcomes
    finally:
        gw.stop()


def test_protocol_violations_rejected_before_upstream(running_gateway, mock_server):
    transcript = client_for(running_gateway).run()
    before = len(mock_server.requests)
    resp = requests.post(
        f"http://127.0.0.1:{running_gateway.public_port}/messages",
        headers={"Host": ROUTE_HOST, "Authorization": f"Bearer {transcript.access_token}",
                 "Content-Type": "application/json"},
        data=b'{"jsonrpc":"1.0","id":1,"method":"ping"}',
        timeout=10,
    )
    assert resp.status_code == 400
    assert len(mock_server.requests) == before  # never forwarded


def test_valid_tool_call_passes_inspection(running_gateway):
    transcript = client_for(running_gateway).run()
    resp = requests.post(
        f"http://127.0.0.1:{running_gateway.public_port}/messages",
        headers={"Host": ROUTE_HOST, "Authorization": f"Bearer {transcript.access_token}",
                 "Content-Type": "application/json"},
        json={"jsonrpc": "2.0", "id": 7, "method": "tools/call",
              "params": {"name": "helloworld", "arguments": {}}},
        timeout=10,
    )
    assert resp.status_code == 200
    assert resp.json()["result"]["content"][0]["text"] == "Hello, world!"


# -- admin plane -------------------------------------------------------------


def test_admin_requires_key(running_gateway):
    assert admin(running_gateway, "GET", "/admin/servers", key=None).status_code == 401
    assert admin(running_gateway, "GET", "/admin/servers", key="wrong").status_code == 401


def test_readonly_key_cannot_write(running_gateway):
    resp = admin(running_gateway, "POST", "/admin/bans", key=READONLY_KEY,
                 json={"target": "192.0.2.1"})
    assert resp.status_code == 403
    assert admin(running_gateway, "GET", "/admin/bans", key=READONLY_KEY).status_code == 200


def test_hot_onboarding_creates_live_route(tmp_path, mock_server):
    gw = make_gateway(tmp_path, upstream_url=mock_server.url)
    gw.start(health_prober=None)
    try:
        second = MockMcpServer(default_script_greeting())
        second.start()
        try:
            before = [r for r in gw.audit.records() if r.kind == "config_change"]
            resp = admin(gw, "POST", "/admin/servers", json={
                "display_name": "Second Server",
                "upstream_url": second.url,
                "host_rule": "second.example.test",
                "middleware_ids": ["ban-check"],
            })
            assert resp.status_code == 201, resp.text
            onboarded = resp.json()
            assert onboarded["route"]["host_rule"] == "second.example.test"

            # route serves immediately, without restart
            live = requests.get(
                f"http://127.0.0.1:{gw.public_port}/sse",
                headers={"Host": "second.example.test"},
                stream=True, timeout=10,
            )
            assert live.status_code == 200
            live.close()

            after = [r for r in gw.audit.records() if r.kind == "config_change"]
            new = after[len(before):]
            assert len(new) == 1
            assert new[0].summary["event"] == "server_onboarded"
        finally:
            second.stop()
    finally:
        gw.stop()


def default_script_greeting():
    from mcpgate.testkit.mockserver import default_script

    return default_script()


def test_onboarding_validation_failure_is_422(running_gateway):
    resp = admin(running_gateway, "POST", "/admin/servers", json={
        "display_name": "Bad",
        "upstream_url": "ftp://example.test",
        "host_rule": "bad.example.test",
    })
    assert resp.status_code == 422
    body = resp.json()
    assert body["error"] == "validation_failed"
    assert any("upstream_url" in d for d in body["diagnostics"])


def test_onboarded_backend_survives_restart(tmp_path, mock_server):
    gw = make_gateway(tmp_path, upstream_url=mock_server.url)
    gw.start(health_prober=None)
    try:
        admin(gw, "POST", "/admin/servers", json={
            "display_name": "Second",
            "upstream_url": "http://127.0.0.1:9002",
            "host_rule": "second.example.test",
        })
    finally:
        gw.stop()

    gw2 = make_gateway(tmp_path, upstream_url=mock_server.url)
    snap = gw2.registry.snapshot()
    assert "second" in snap.backends
    assert any(r.host_rule == "second.example.test" for r in snap.routes)


def test_route_middleware_edit_and_version_conflict(running_gateway):
    routes = admin(running_gateway, "GET", "/admin/routes").json()
    version = routes["version"]
    resp = admin(running_gateway, "PUT", "/admin/routes/helloworld-router/middlewares",
                 json={"middleware_ids": ["ban-check"], "version": version})
    assert resp.status_code == 200
    assert resp.json()["middleware_ids"] == ["ban-check"]
    # stale version now conflicts
    resp = admin(running_gateway, "PUT", "/admin/routes/helloworld-router/middlewares",
                 json={"middleware_ids": ["ban-check", "mcp-auth"], "version": version})
    assert resp.status_code == 409
    assert resp.json()["error"] == "version_mismatch"


def test_operator_ban_blocks_and_lift_restores(running_gateway):
    transcript = client_for(running_gateway).run()
    assert authed_get(running_gateway, transcript.access_token).status_code == 200

    resp = admin(running_gateway, "POST", "/admin/bans",
                 json={"target": "127.0.0.1", "reason": "manual"})
    assert resp.status_code == 201
    ban_id = resp.json()["id"]
    assert authed_get(running_gateway, transcript.access_token).status_code == 403

    assert admin(running_gateway, "DELETE", f"/admin/bans/{ban_id}").status_code == 200
    assert authed_get(running_gateway, transcript.access_token).status_code == 200
    kinds = [(r.kind, r.summary.get("event")) for r in running_gateway.audit.records()]
    assert ("ban_applied", None) in kinds
    assert ("config_change", "ban_lifted") in kinds


def test_detections_listing(running_gateway):
    transcript = client_for(running_gateway).run()
    requests.post(
        f"http://127.0.0.1:{running_gateway.public_port}/messages",
        headers={"Host": ROUTE_HOST, "Authorization": f"Bearer {transcript.access_token}"},
        data=b"not json", timeout=10,
    )
    events = admin(running_gateway, "GET", "/admin/detections").json()
    assert any(e["rule_id"] == "protocol-strict" for e in events)


def test_health_endpoint(running_gateway):
    body = admin(running_gateway, "GET", "/admin/health").json()
    assert body["audit_healthy"] is True
    assert body["backends"] == {"helloworld": "unknown"}


def test_whoami(running_gateway):
    body = admin(running_gateway, "GET", "/admin/whoami", key=READONLY_KEY).json()
    assert body == {"name": "viewer", "permissions": "read"}


def test_audit_tail_streams_backlog(running_gateway):
    client_for(running_gateway).run()
    resp = requests.get(
        admin_url(running_gateway, "/admin/audit/tail"),
        headers={"X-Admin-Key": ADMIN_KEY},
        stream=True,
        timeout=10,
    )
    assert resp.status_code == 200
    assert resp.headers["Content-Type"].startswith("text/event-stream")
    lines = []
    for raw in resp.iter_lines():
        if raw.startswith(b"data: "):
            lines.append(json.loads(raw[len(b"data: "):]))
            if len(lines) >= 3:
                break
    resp.close()
    assert all("hash" in obj and "kind" in obj for obj in lines)
    seqs = [obj["seq"] for obj in lines]
    assert seqs == sorted(seqs)


def test_rate_limit_middleware_in_chain(tmp_path, mock_server):
    extra = """\
limiter:
  type: rate_limit
  rate: 1.0
  burst: 3
"""
    gw = make_gateway(
        tmp_path,
        upstream_url=mock_server.url,
        extra_middlewares=extra,
        chain="[redirect-wellknown, ban-check, limiter, mcp-auth]",
    )
    gw.start(health_prober=None)
    try:
        transcript = client_for(gw).run()
        assert transcript.passed, transcript.failed_step()
        # the flow consumed some tokens; exhaust the remainder
        statuses = [authed_get(gw, transcript.access_token).status_code for _ in range(5)]
        assert 429 in statuses
        denied = [
            s for s in statuses if s == 429
        ]
        assert denied  # Retry-After present on the denial
        resp = authed_get(gw, transcript.access_token)
        if resp.status_code == 429:
            assert float(resp.headers["Retry-After"]) > 0
    finally:
        gw.stop()
