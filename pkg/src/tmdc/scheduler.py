"""Deterministic multi-rate scheduler.

Control loops, sensor emissions and scripted scenario events all live on one
event heap ordered by (time, kind, registration order).  One-shot events
outrank loops at equal timestamps; loops registered earlier outrank later
ones, so sensors are registered before the controllers that consume them.

Each loop tick is scheduled at its nominal time plus a fresh uniform jitter
draw in [-J, +J].  J is constrained below half the loop period, which keeps
every loop's own firing sequence strictly increasing in time.  All draws
come from a single stdlib Random seeded per run, so schedules are
reproducible bit-for-bit.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass
from typing import Callable


@dataclass
class LoopSpec:
    """Static description of a periodic loop."""

    name: str
    rate_hz: float
    rate_scale: float = 1.0
    jitter: float = 0.0
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.rate_hz <= 0.0 or self.rate_scale <= 0.0:
            raise ValueError("rate and rate_scale must be positive")
        if self.period <= 1e-6:
            raise ValueError("scaled loop period must exceed the 1 us time quantum")
        if self.phase < 0.0:
            raise ValueError("phase must be >= 0")
        _check_jitter(self.jitter, self.period)

    @property
    def period(self) -> float:
        return 1.0 / (self.rate_hz * self.rate_scale)


def _check_jitter(jitter: float, period: float) -> None:
    if jitter < 0.0 or jitter >= 0.5 * period:
        raise ValueError(
            f"jitter must satisfy 0 <= J < period/2 (J={jitter}, period={period})"
        )


@dataclass(frozen=True)
class Timeline:
    """Run extent and reproducibility inputs."""

    duration: float
    seed: int | str = 0
    inner_dt: float = 0.0025

    def __post_init__(self) -> None:
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")
        if self.inner_dt <= 0.0:
            raise ValueError("inner_dt must be positive")


class LoopHandle:
    """Runtime state of a registered loop; exposes live rate/jitter changes.

    Nominal tick times are computed as base + k * period (not accumulated),
    so t_k stays the correctly rounded multiple of the period; 1 s at 80 Hz
    is exactly 80 ticks in a half-open window regardless of run length.
    The base resets when the rate changes.
    """

    def __init__(
        self,
        spec: LoopSpec,
        callback: Callable[[float, float], None],
        seq: int,
        scheduler: "Scheduler",
    ):
        self.spec = spec
        self.callback = callback
        self.seq = seq
        self.period = spec.period
        self.jitter = spec.jitter
        self.base = spec.phase
        self.ticks = 0  # ticks since base
        self.last_fire: float | None = None
        self.fired = 0
        self.epoch = 0  # bumped on reschedule; stale heap entries are skipped
        self._scheduler = scheduler

    @property
    def next_nominal(self) -> float:
        return self.base + self.ticks * self.period

    def set_rate_scale(self, factor: float, now: float) -> None:
        """Change the loop rate from `now` on; next tick one new period out."""
        if factor <= 0.0:
            raise ValueError("rate_scale must be positive")
        self.period = 1.0 / (self.spec.rate_hz * factor)
        _check_jitter(self.jitter, self.period)
        self.base = now + self.period
        self.ticks = 0
        self.epoch += 1
        self._scheduler._push_loop(self)  # queued entries are now stale

    def set_jitter(self, jitter: float) -> None:
        _check_jitter(jitter, self.period)
        self.jitter = jitter


class SchedulerStats(dict):
    """Fire counts per loop plus bookkeeping totals."""


_KIND_EVENT = 0
_KIND_LOOP = 1


class Scheduler:
    def __init__(self, seed: int | str = 0):
        self._rng = random.Random(f"{seed}:jitter")
        self._heap: list = []
        self._loops: dict[str, LoopHandle] = {}
        self._counter = 0
        self._events_run = 0
        self._stopped = False
        self.now = 0.0
        self.advance: Callable[[float, float], None] | None = None

    def register(self, spec: LoopSpec, callback: Callable[[float, float], None]) -> LoopHandle:
        """Add a periodic loop; callback(now, measured_dt). Names are unique."""
        if spec.name in self._loops:
            raise ValueError(f"duplicate loop name {spec.name!r}")
        handle = LoopHandle(spec, callback, seq=len(self._loops), scheduler=self)
        self._loops[spec.name] = handle
        self._push_loop(handle)
        return handle

    def at(self, time: float, callback: Callable[[float], None]) -> None:
        """Schedule a one-shot event; events precede loops at equal times."""
        if time < 0.0:
            raise ValueError("event time must be >= 0")
        self._counter += 1
        heapq.heappush(self._heap, (time, _KIND_EVENT, self._counter, callback, None, 0))

    def loop(self, name: str) -> LoopHandle:
        return self._loops[name]

    @property
    def loops(self) -> dict[str, LoopHandle]:
        return dict(self._loops)

    def stop(self) -> None:
        """Abort the run after the current callback returns."""
        self._stopped = True

    def _push_loop(self, handle: LoopHandle) -> None:
        fire = handle.next_nominal
        if handle.jitter > 0.0:
            fire += self._rng.uniform(-handle.jitter, handle.jitter)
        if fire < 0.0:
            fire = 0.0
        self._counter += 1
        heapq.heappush(
            self._heap,
            (fire, _KIND_LOOP, handle.seq, self._counter, handle, handle.epoch),
        )

    def run(self, timeline: Timeline) -> SchedulerStats:
        """Execute over [0, duration); returns per-loop fire counts.

        The window is half-open so tick counts are exact (1 s at 80 Hz fires
        80 times) independent of float accumulation; the plant still
        integrates through to `duration`.
        """
        until = timeline.duration
        self._stopped = False
        while self._heap and not self._stopped:
            entry = self._heap[0]
            t = entry[0]
            if t >= until:
                break
            heapq.heappop(self._heap)
            if entry[1] == _KIND_LOOP:
                handle: LoopHandle = entry[4]
                if entry[5] != handle.epoch:
                    continue  # rescheduled since this entry was pushed
                if self.advance is not None and t > self.now:
                    self.advance(self.now, t)
                self.now = max(self.now, t)
                measured = (
                    t - handle.last_fire if handle.last_fire is not None else handle.period
                )
                handle.callback(t, measured)
                handle.last_fire = t
                handle.fired += 1
                if entry[5] == handle.epoch:  # not rescheduled by the callback
                    handle.ticks += 1
                    self._push_loop(handle)
            else:
                callback = entry[3]
                if self.advance is not None and t > self.now:
                    self.advance(self.now, t)
                self.now = max(self.now, t)
                callback(t)
                self._events_run += 1
        if not self._stopped and self.advance is not None and until > self.now:
            self.advance(self.now, until)
            self.now = until
        stats = SchedulerStats(
            {name: h.fired for name, h in self._loops.items()}
        )
        stats["_events"] = self._events_run
        stats["_end_time"] = self.now
        stats["_aborted"] = self._stopped
        return stats
