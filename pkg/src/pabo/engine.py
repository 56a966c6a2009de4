"""Deterministic discrete-event core.

Virtual time is kept as integer nanoseconds. Events sharing a fire time are
dispatched in insertion order.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, Callable

NS_PER_S = 1_000_000_000


def to_ns(seconds: float) -> int:
    return int(round(seconds * NS_PER_S))


def to_seconds(ns: int) -> float:
    return ns / NS_PER_S


class EventKind(IntEnum):
    FRAME_ARRIVAL = 0
    TX_COMPLETE = 1
    GENERATOR_TICK = 2
    TIMER_EXPIRY = 3


class SimulationError(RuntimeError):
    """A handler failed; the message names the offending event."""


class SchedulingError(ValueError):
    pass


class ScenarioError(RuntimeError):
    """Fatal scenario diagnostic raised from inside a handler; not wrapped."""


@dataclass(frozen=True)
class Event:
    fire_time: int
    target: Any
    kind: EventKind
    payload: Any = None


@dataclass(frozen=True)
class SimReport:
    final_time: float
    dispatched: int
    scheduled: int
    cancelled: int
    pending: int


def derive_seed(seed: int, *parts: object) -> int:
    """Stable 64-bit seed from a base seed and any hashable labels."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for p in parts:
        h.update(b"\x1f")
        h.update(str(p).encode())
    return int.from_bytes(h.digest(), "big")


class RngStream:
    """A named, independently seeded uniform stream."""

    __slots__ = ("stream_id", "seed", "draw_count", "_rng")

    def __init__(self, stream_id: str, seed: int):
        self.stream_id = stream_id
        self.seed = seed
        self.draw_count = 0
        self._rng = random.Random(derive_seed(seed, stream_id))

    def uniform(self) -> float:
        self.draw_count += 1
        return self._rng.random()


def draw_uniform(stream: RngStream) -> float:
    return stream.uniform()


Handler = Callable[[Any, Any], None]


class Simulator:
    """Event queue keyed by (fire_time, insertion sequence)."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.now = 0
        self._heap: list[tuple[int, int, int, Any, Any]] = []
        self._seq = 0
        self._cancelled: set[int] = set()
        self._handlers: dict[int, Handler] = {}
        self._streams: dict[str, RngStream] = {}
        self.dispatched = 0
        self.n_cancelled = 0

    @property
    def now_s(self) -> float:
        return self.now / NS_PER_S

    def on(self, kind: EventKind, handler: Handler) -> None:
        self._handlers[int(kind)] = handler

    def stream(self, stream_id: str) -> RngStream:
        s = self._streams.get(stream_id)
        if s is None:
            s = self._streams[stream_id] = RngStream(stream_id, self.seed)
        return s

    def schedule(self, at: float, ev: Event | None = None, *, kind=None,
                 target=None, payload=None) -> int:
        """Schedule at an absolute time in seconds; returns a cancellation handle."""
        if ev is not None:
            return self.schedule_ns(to_ns(at), ev.kind, ev.target, ev.payload)
        return self.schedule_ns(to_ns(at), kind, target, payload)

    def schedule_ns(self, at_ns: int, kind, target=None, payload=None) -> int:
        if at_ns < self.now:
            raise SchedulingError(
                f"cannot schedule {EventKind(kind).name} at {at_ns} ns; clock is {self.now} ns")
        seq = self._seq
        self._seq = seq + 1
        heapq.heappush(self._heap, (at_ns, seq, int(kind), target, payload))
        return seq

    def after_ns(self, delay_ns: int, kind, target=None, payload=None) -> int:
        return self.schedule_ns(self.now + delay_ns, kind, target, payload)

    def cancel(self, handle: int) -> None:
        # cancelling an event that already fired is a no-op
        self._cancelled.add(handle)

    def run(self, until: float) -> SimReport:
        return self.run_ns(to_ns(until))

    def run_ns(self, until_ns: int) -> SimReport:
        heap = self._heap
        handlers = self._handlers
        cancelled = self._cancelled
        pop = heapq.heappop
        while heap and heap[0][0] <= until_ns:
            t, seq, kind, target, payload = pop(heap)
            if cancelled and seq in cancelled:
                cancelled.discard(seq)
                self.n_cancelled += 1
                continue
            self.now = t
            try:
                handlers[kind](target, payload)
            except (SimulationError, ScenarioError):
                raise
            except Exception as exc:
                raise SimulationError(
                    f"handler for {EventKind(kind).name} (event #{seq}) at "
                    f"t={t} ns on {target!r} failed: {exc}") from exc
            self.dispatched += 1
        if until_ns > self.now:
            self.now = until_ns
        dead = sum(1 for e in heap if e[1] in cancelled)
        return SimReport(
            final_time=self.now / NS_PER_S,
            dispatched=self.dispatched,
            scheduled=self._seq,
            cancelled=self.n_cancelled + dead,
            pending=len(heap) - dead,
        )
