"""Tool-description poisoning detectors.

Backends advertise tools via tools/list; a hostile or compromised backend can
hide instructions for the consuming model inside tool descriptions. These
detectors are deliberately heuristic and enumerated — each has a stable rule
id under the "builtin." prefix so operators can reference them in rule config.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from typing import Dict, List

MAX_DESCRIPTION_CHARS = 4096

# Phrases strongly associated with instruction injection against the model.
_INJECTION_PHRASES = (
    "ignore previous instructions",
    "ignore all previous instructions",
    "disregard previous instructions",
    "do not tell the user",
    "don't tell the user",
    "do not inform the user",
    "without telling the user",
    "<important>",
    "</important>",
    "<system>",
    "you must always",
    "before using this tool",
    "instead of the user's request",
)
_INJECTION_RE = re.compile("|".join(re.escape(p) for p in _INJECTION_PHRASES), re.IGNORECASE)

# Zero-width / invisible characters and bidi override controls.
_INVISIBLE = {
    "\u200b",  # zero width space
    "\u200c",  # zero width non-joiner
    "\u200d",  # zero width joiner
    "\u2060",  # word joiner
    "\ufeff",  # zero width no-break space
    "\u00ad",  # soft hyphen
}
_BIDI = {
    "\u202a", "\u202b", "\u202c", "\u202d", "\u202e",  # embedding/override
    "\u2066", "\u2067", "\u2068", "\u2069",  # isolates
}

_HTML_COMMENT_RE = re.compile(r"<!--.*?(-->|$)", re.DOTALL)
_MD_COMMENT_RE = re.compile(r"\[[^\]]*\]:\s*#|\[//\]:\s*")


@dataclass(frozen=True)
class Finding:
    tool: str
    rule_id: str  # builtin.<detector>
    detail: str


def _has_invisible(text: str) -> bool:
    for ch in text:
        if ch in _INVISIBLE or ch in _BIDI:
            return True
        if unicodedata.category(ch) == "Cf" and ch not in ("\n", "\t"):
            return True
    return False


def scan_tool_descriptions(tools: List[Dict]) -> List[Finding]:
    """Run every detector over every tool; findings are per-tool, per-detector."""
    findings: List[Finding] = []
    names = [t.get("name", "") for t in tools]
    for tool in tools:
        name = tool.get("name", "")
        description = tool.get("description", "") or ""
        text = f"{name}\n{description}"

        match = _INJECTION_RE.search(text)
        if match:
            findings.append(Finding(name, "builtin.instruction_injection", f"phrase: {match.group(0)!r}"))

        if _has_invisible(text):
            findings.append(Finding(name, "builtin.invisible_chars", "invisible or bidi-control code points present"))

        if _HTML_COMMENT_RE.search(description) or _MD_COMMENT_RE.search(description):
            findings.append(Finding(name, "builtin.hidden_comment", "embedded HTML/markdown comment"))

        for other in names:
            if other and other != name and re.search(rf"\b{re.escape(other)}\b", description):
                findings.append(Finding(name, "builtin.cross_tool_reference", f"references tool {other!r}"))
                break

        if len(description) > MAX_DESCRIPTION_CHARS:
            findings.append(
                Finding(name, "builtin.oversized_description", f"{len(description)} chars > {MAX_DESCRIPTION_CHARS}")
            )
    return findings
