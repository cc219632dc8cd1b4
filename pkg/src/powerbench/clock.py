"""Time sources.

Every component takes a clock object so tests can run on virtual time.
``SimClock`` is the default for simulated vantage points: ``sleep`` advances
virtual time instantly, which is what lets a 600 s measurement finish in
milliseconds of wall time.
"""

from __future__ import annotations

import threading
import time


class SimClock:
    """Virtual clock. Starts at ``start`` seconds and only moves on demand."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)
        self._lock = threading.Lock()

    def now(self) -> float:
        return self._now

    def advance(self, dt: float) -> float:
        if dt < 0:
            raise ValueError("cannot advance a clock backwards")
        with self._lock:
            self._now += dt
            return self._now

    def advance_to(self, t: float) -> float:
        with self._lock:
            if t > self._now:
                self._now = t
            return self._now

    def sleep(self, dt: float) -> None:
        self.advance(dt)


class WallClock:
    """Real time, for live deployments of the server and controller."""

    def now(self) -> float:
        return time.time()

    def sleep(self, dt: float) -> None:
        time.sleep(dt)
