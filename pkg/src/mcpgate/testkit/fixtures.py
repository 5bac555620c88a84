"""Loaders for the bundled fixture corpora."""

from __future__ import annotations

import json
import os
from typing import Dict, List, Tuple

_DIR = os.path.join(os.path.dirname(__file__), "fixtures")


def poisoning_corpus() -> Tuple[List[Dict], Dict[str, List[str]]]:
    """Returns (tools, manifest). The manifest maps each poisoned tool name to
    the exact detector ids it must trigger; tools absent from the manifest are
    clean and must trigger nothing."""
    with open(os.path.join(_DIR, "poisoning_corpus.json"), "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return data["tools"], data["manifest"]


def message_corpus() -> Tuple[List[Dict], List[str]]:
    """Returns (malformed, wellformed); each malformed entry carries the
    violation codes it must produce."""
    with open(os.path.join(_DIR, "message_corpus.json"), "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return data["malformed"], data["wellformed"]
