from .mockserver import MockMcpServer, MockServerScript, default_script
from .client import HostMap, ScriptedClient, StepResult

__all__ = [
    "MockMcpServer",
    "MockServerScript",
    "default_script",
    "HostMap",
    "ScriptedClient",
    "StepResult",
]
