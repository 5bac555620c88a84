"""mcpgate: a self-hostable security gateway for unauthenticated MCP servers.

Fronts backend MCP servers with OAuth 2.1 (PKCE + dynamic client
registration), per-route policy (rate limits, behavioural bans), MCP-aware
threat inspection, and a hash-chained audit trail, proxying SSE transport
transparently.
"""

from .config import GatewayConfig, load_config
from .gateway import Gateway

__all__ = ["Gateway", "GatewayConfig", "load_config"]
__version__ = "0.1.0"
