import textwrap

import pytest

from mcpgate.clock import FakeClock
from mcpgate.config import load_config
from mcpgate.gateway import Gateway
from mcpgate.testkit.mockserver import MockMcpServer, MockServerScript, default_script

ROUTE_HOST = "helloworld.example.test"
OAUTH_HOST = "oauth.example.test"
ADMIN_KEY = "test-admin-key"
READONLY_KEY = "test-readonly-key"


def config_text(upstream_url: str, state_dir: str, extra_rules: str = "", extra_middlewares: str = "",
                chain: str = "[redirect-wellknown, ban-check, mcp-auth, inspect]") -> str:
    mw_block = textwrap.indent(extra_middlewares, "  ") if extra_middlewares else ""
    rules_block = textwrap.indent(extra_rules, "  ") if extra_rules else ""
    base = textwrap.dedent(
        f"""
        entry_points:
          web:
            address: "127.0.0.1:0"
        admin:
          address: "127.0.0.1:0"
          principals:
            - name: root
              api_key: "{ADMIN_KEY}"
              permissions: write
            - name: viewer
              api_key: "{READONLY_KEY}"
              permissions: read
        oauth:
          issuer: "http://{OAUTH_HOST}"
          users: [alice, bob]
          default_resource_host: {ROUTE_HOST}
        middlewares:
          mcp-auth:
            type: forward_auth
          redirect-wellknown:
            type: redirect_wellknown
          ban-check:
            type: ban_check
          inspect:
            type: inspect
            rules: [protocol-strict]
        EXTRA_MIDDLEWARES
        rules:
          - id: protocol-strict
            target: message
            pattern: {{kind: detector, value: "*"}}
            severity: medium
            action: deny
        EXTRA_RULES
        backends:
          - id: helloworld
            display_name: Hello World
            upstream_url: "{upstream_url}"
            transport: sse
        routers:
          - id: helloworld-router
            host_rule: {ROUTE_HOST}
            path_prefix: /
            middlewares: {chain}
            backend: helloworld
        state_dir: "{state_dir}"
        """
    )
    return base.replace("EXTRA_MIDDLEWARES\n", mw_block).replace("EXTRA_RULES\n", rules_block)


def make_gateway(tmp_path, upstream_url="http://127.0.0.1:9", clock=None, **kwargs) -> Gateway:
    config, diags = load_config(config_text(upstream_url, str(tmp_path / "state"), **kwargs))
    assert config is not None, diags
    return Gateway(config, clock=clock or FakeClock())


@pytest.fixture
def mock_server():
    server = MockMcpServer(default_script())
    server.start()
    yield server
    server.stop()


@pytest.fixture
def running_gateway(tmp_path, mock_server):
    gw = make_gateway(tmp_path, upstream_url=mock_server.url)
    gw.start(health_prober=None)
    yield gw
    gw.stop()
