"""Credential redaction applied before anything reaches audit records or detection events."""

from __future__ import annotations

import re

# Bearer values and anything that looks like a compact credential next to a
# known key name. Opaque tokens issued here are 43+ chars of URL-safe base64.
_BEARER = re.compile(r"(?i)\bbearer\s+[A-Za-z0-9_\-\.=+/]+")
_KEYED = re.compile(
    r"(?i)\b(access_token|refresh_token|code_verifier|client_secret|api[_-]?key|authorization)"
    r"\s*[=:]\s*\"?[A-Za-z0-9_\-\.=+/]{8,}\"?"
)

REDACTED = "[REDACTED]"


def redact_text(text: str) -> str:
    text = _BEARER.sub(REDACTED, text)
    text = _KEYED.sub(lambda m: f"{m.group(1)}={REDACTED}", text)
    return text
