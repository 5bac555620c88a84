"""Clock seam: every time-dependent component takes a Clock so tests can drive time."""

from __future__ import annotations

import time


class Clock:
    """Real clock. monotonic() feeds rate limiting / TTLs, wall_ms() feeds audit timestamps."""

    def monotonic(self) -> float:
        return time.monotonic()

    def wall_ms(self) -> int:
        return int(time.time() * 1000)


class FakeClock(Clock):
    """Deterministic clock for tests; advance() moves both axes together."""

    def __init__(self, start: float = 0.0, wall_start_ms: int = 1_700_000_000_000):
        self._mono = start
        self._wall_ms = wall_start_ms

    def monotonic(self) -> float:
        return self._mono

    def wall_ms(self) -> int:
        return self._wall_ms

    def advance(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("clock cannot go backwards")
        self._mono += seconds
        self._wall_ms += int(seconds * 1000)


SYSTEM_CLOCK = Clock()
