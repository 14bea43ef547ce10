"""Injected time sources. The engine never reads the wall clock itself."""

from __future__ import annotations

import time
from typing import Protocol, Union

Timestamp = Union[int, float]

SECONDS_PER_HOUR = 3600


class Clock(Protocol):
    def now(self) -> Timestamp: ...


class WallClock:
    def now(self) -> int:
        return int(time.time())


class SimClock:
    """Manually driven clock for tests and simulations."""

    def __init__(self, start: Timestamp = 0):
        self._t = start

    def now(self) -> Timestamp:
        return self._t

    def set(self, t: Timestamp) -> None:
        if t < self._t:
            raise ValueError(f"clock cannot move backwards ({t} < {self._t})")
        self._t = t

    def advance(self, seconds: Timestamp = 0, *, hours: float = 0) -> Timestamp:
        self.set(self._t + seconds + hours * SECONDS_PER_HOUR)
        return self._t
