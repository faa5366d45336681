"""Clock abstraction so runs can be made fully deterministic in tests."""

from __future__ import annotations

import time


class Clock:
    """Wall clock (nanoseconds) plus monotonic seconds, both injectable."""

    def now_ns(self) -> int:
        return time.time_ns()

    def monotonic(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)


class FixedClock(Clock):
    """Deterministic clock: every reading advances by a fixed step.

    Used by the benchmark determinism tests and by `--fixed-clock` runs so
    output files are byte-stable across invocations.
    """

    def __init__(self, start_ns: int = 1_700_000_000_000_000_000, step_s: float = 0.001):
        self._wall_ns = start_ns
        self._mono = 0.0
        self._step = step_s

    def now_ns(self) -> int:
        self._wall_ns += int(self._step * 1e9)
        return self._wall_ns

    def monotonic(self) -> float:
        self._mono += self._step
        return self._mono

    def sleep(self, seconds: float) -> None:
        self._mono += seconds
