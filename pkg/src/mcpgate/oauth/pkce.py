"""Proof Key for Code Exchange (S256 only)."""

from __future__ import annotations

import base64
import hashlib
import re

# RFC 3986 unreserved characters, 43-128 of them.
_VERIFIER_RE = re.compile(r"^[A-Za-z0-9\-._~]{43,128}$")


def is_valid_verifier(verifier: str) -> bool:
    return bool(_VERIFIER_RE.match(verifier))


def compute_challenge(verifier: str) -> str:
    """BASE64URL-NOPAD(SHA-256(ascii(verifier)))."""
    digest = hashlib.sha256(verifier.encode("ascii")).digest()
    return base64.urlsafe_b64encode(digest).rstrip(b"=").decode("ascii")
